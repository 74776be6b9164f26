//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! The rule never evaluates the interval endpoints, so integrands with
//! integrable endpoint singularities can be passed on the closed interval.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Adaptive quadrature settings.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    /// Absolute error target.
    pub tol: f64,
    /// Subdivision budget.
    pub max_subintervals: usize,
    /// Number of equal pieces the interval is cut into before adapting, so
    /// that narrow peaks are not missed by the first rule application.
    pub initial_subintervals: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { tol: 1e-8, max_subintervals: 1 << 14, initial_subintervals: 32 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Segment {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kron.abs();
    let mut fv = [(0.0, 0.0); 7];
    for (j, x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv[j] = (f1, f2);
        kron += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kron * half;
    let resabs = abs_sum * half.abs();
    let resasc = asc * half.abs();
    let mut error = ((kron - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * libm::pow(200.0 * error / resasc, 1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * resabs;
    if roundoff > error {
        error = roundoff;
    }
    Segment { lo, hi, value, error }
}

impl Integrator {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Integrate `f` over `[lo, hi]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain("integration bounds must be finite with lo < hi"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain("integration tolerance must be positive"));
        }
        let pieces = self.initial_subintervals.clamp(1, self.max_subintervals.max(1));
        let width = (hi - lo) / pieces as f64;
        let mut heap = BinaryHeap::with_capacity(pieces * 2);
        for i in 0..pieces {
            let a = lo + width * i as f64;
            let b = if i + 1 == pieces { hi } else { lo + width * (i + 1) as f64 };
            heap.push(kronrod(&mut f, a, b));
        }

        let (mut value, mut error) = totals(&heap);
        loop {
            if !value.is_finite() {
                return Err(Error::Numeric { estimate: value, error });
            }
            if error <= self.tol {
                // Resum exactly in interval order before accepting.
                let (exact_value, exact_error) = totals(&heap);
                if exact_error <= self.tol {
                    return Ok(exact_value);
                }
                value = exact_value;
                error = exact_error;
            }
            if heap.len() >= self.max_subintervals {
                let (value, error) = totals(&heap);
                return Err(Error::Numeric { estimate: value, error });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.lo + worst.hi);
            if !(worst.lo < mid && mid < worst.hi) || worst.error == 0.0 {
                // Nothing left to refine in floating point.
                heap.push(worst);
                let (value, error) = totals(&heap);
                if error <= self.tol {
                    return Ok(value);
                }
                return Err(Error::Numeric { estimate: value, error });
            }
            let left = kronrod(&mut f, worst.lo, mid);
            let right = kronrod(&mut f, mid, worst.hi);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
    }
}

// Sum in interval order so the result does not depend on heap layout.
fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    let mut segments: alloc::vec::Vec<&Segment> = heap.iter().collect();
    segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut value = 0.0;
    let mut error = 0.0;
    for s in segments {
        value += s.value;
        error += s.error;
    }
    (value, error)
}

/// Integrate with the default settings and absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    Integrator::with_tol(tol).integrate(f, lo, hi)
}
