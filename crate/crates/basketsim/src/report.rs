//! Aligned text tables rendered from simulation CSV rows, and weight curves.

use std::fmt::Write;

use basket_core::design::Design;
use basket_core::fujikawa::{self, FujikawaParams};
use basket_core::powerprior::{self, CppParams};
use basket_core::{Basket, BetaShape, Pattern, SizeFamily};

use crate::output::OcRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Ecd,
    Rejection,
    Bias,
    Weights,
}

impl Table {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ecd" => Some(Table::Ecd),
            "rejection" => Some(Table::Rejection),
            "bias" => Some(Table::Bias),
            "weights" => Some(Table::Weights),
            _ => None,
        }
    }
}

fn rows_for<'a>(rows: &'a [OcRow], family: SizeFamily, pattern: Pattern, design: Design) -> Vec<&'a OcRow> {
    let mut out: Vec<&OcRow> = rows
        .iter()
        .filter(|r| {
            SizeFamily::parse(&r.size_family) == Some(family)
                && Pattern::parse(&r.pattern) == Some(pattern)
                && Design::parse(&r.design) == Some(design)
        })
        .collect();
    out.sort_by_key(|r| r.basket_index);
    out
}

fn designs_present(rows: &[OcRow], family: SizeFamily) -> Vec<Design> {
    Design::ALL
        .into_iter()
        .filter(|&d| rows.iter().any(|r| Design::parse(&r.design) == Some(d) && SizeFamily::parse(&r.size_family) == Some(family)))
        .collect()
}

/// Designs as rows, patterns and their mean as columns.
pub fn ecd_table(rows: &[OcRow], family: SizeFamily) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "Design");
    for p in Pattern::ALL {
        let _ = write!(out, "{:>13}", p.name());
    }
    let _ = writeln!(out, "{:>8}", "Mean");
    for design in designs_present(rows, family) {
        let _ = write!(out, "{:<10}", design.name());
        let mut values = Vec::new();
        for p in Pattern::ALL {
            match rows_for(rows, family, p, design).first() {
                Some(r) => {
                    values.push(r.ecd_mean);
                    let _ = write!(out, "{:>13.3}", r.ecd_mean);
                }
                None => {
                    let _ = write!(out, "{:>13}", "-");
                }
            }
        }
        if values.len() == Pattern::ALL.len() {
            let _ = writeln!(out, "{:>8.3}", values.iter().sum::<f64>() / values.len() as f64);
        } else {
            let _ = writeln!(out, "{:>8}", "-");
        }
    }
    out
}

fn per_basket_table(rows: &[OcRow], family: SizeFamily, value: fn(&OcRow) -> f64, with_fwer: bool) -> String {
    let mut out = String::new();
    let k = rows
        .iter()
        .filter(|r| SizeFamily::parse(&r.size_family) == Some(family))
        .map(|r| r.basket_index)
        .max()
        .unwrap_or(0);
    let _ = write!(out, "{:<13}{:<10}", "Pattern", "Design");
    for j in 1..=k {
        let _ = write!(out, "{:>10}", format!("Basket {j}"));
    }
    if with_fwer {
        let _ = write!(out, "{:>8}", "FWER");
    }
    out.push('\n');
    for p in Pattern::ALL {
        for design in designs_present(rows, family) {
            let basket_rows = rows_for(rows, family, p, design);
            if basket_rows.is_empty() {
                continue;
            }
            let _ = write!(out, "{:<13}{:<10}", p.name(), design.name());
            for r in &basket_rows {
                let _ = write!(out, "{:>10.3}", value(r));
            }
            if with_fwer {
                let _ = write!(out, "{:>8.3}", basket_rows[0].fwer);
            }
            out.push('\n');
        }
    }
    out
}

/// Patterns as row groups, designs within each pattern, baskets and FWER as columns.
pub fn rejection_table(rows: &[OcRow], family: SizeFamily) -> String {
    per_basket_table(rows, family, |r| r.rejection_rate, true)
}

pub fn bias_table(rows: &[OcRow], family: SizeFamily) -> String {
    per_basket_table(rows, family, |r| r.bias, false)
}

/// Borrowing weights of basket `k` from basket `i` as the observed rate of
/// basket `i` moves, for equal and unequal sample sizes. Columns: design,
/// parameters, both sizes and responses, rate difference, weight.
pub fn weights_rows() -> Vec<Vec<String>> {
    let layouts = [(20u32, 20u32), (10, 30)];
    let cpp_params = [(4.0, 4.5), (3.0, 4.0), (1.0, 1.0)];
    let epsilons = [1.0, 1.5, 2.5];
    let mut rows = Vec::new();
    for (n_k, n_i) in layouts {
        let r_k = n_k / 5;
        let own = Basket { responses: r_k, size: n_k };
        for r_i in 0..=n_i {
            let other = Basket { responses: r_i, size: n_i };
            let diff = r_i as f64 / n_i as f64 - r_k as f64 / n_k as f64;
            let mut push = |design: Design, params: String, w: f64| {
                rows.push(vec![
                    design.name().to_string(),
                    params,
                    n_k.to_string(),
                    r_k.to_string(),
                    n_i.to_string(),
                    r_i.to_string(),
                    format!("{diff:.6}"),
                    format!("{w:.6}"),
                ]);
            };
            for (a, b) in cpp_params {
                let p = CppParams { a, b };
                let json = format!(r#"{{"a":{a:?},"b":{b:?}}}"#);
                push(Design::Cpp, json.clone(), powerprior::cpp_weight(own, other, p).unwrap_or(f64::NAN));
                push(Design::Lcpp, json, powerprior::lcpp_weight(own, other, p).unwrap_or(f64::NAN));
            }
            push(Design::App, "{}".into(), powerprior::app_weight(own, other));
            let f = BetaShape { alpha: 1.0 + own.responses as f64, beta: 1.0 + own.failures() as f64 };
            let g = BetaShape { alpha: 1.0 + other.responses as f64, beta: 1.0 + other.failures() as f64 };
            let divergence = fujikawa::jsd(f, g).unwrap_or(f64::NAN);
            for epsilon in epsilons {
                let p = FujikawaParams { epsilon, tau: 0.0 };
                push(Design::Fujikawa, format!(r#"{{"epsilon":{epsilon:?},"tau":0.0}}"#), fujikawa::weight_from_jsd(divergence, p));
            }
        }
    }
    rows
}

pub const WEIGHT_COLUMNS: [&str; 8] = ["design", "param_json", "n_k", "r_k", "n_i", "r_i", "rate_difference", "weight"];
