//! Compensated floating-point accumulation and Gauss–Legendre quadrature.
//!
//! Every sum that feeds a reported quantity goes through these helpers in a
//! fixed order, so results do not depend on thread count.

/// Error-free transformation `a + b = s + e`.
#[inline(always)]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Unevaluated sum `hi + lo` carrying roughly twice the working precision.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    #[inline(always)]
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    #[inline(always)]
    pub fn add(self, other: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        DoubleDouble::new(s, e)
    }

    #[inline(always)]
    pub fn sub(self, other: DoubleDouble) -> DoubleDouble {
        self.add(DoubleDouble {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    #[inline(always)]
    pub fn add_f64(self, x: f64) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, x);
        DoubleDouble::new(s, e + self.lo)
    }

    #[inline(always)]
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = DoubleDouble::ZERO;
    for v in values {
        acc = acc.add_f64(v);
    }
    acc.value()
}

/// `base^e` for an integer exponent, exact for powers of two in range.
pub fn pow2i(e: i32) -> f64 {
    2f64.powi(e)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre rule: `cuts` split `[cuts[0], cuts.last()]`
/// into panels, each integrated with `rule`.
pub fn integrate_panels(rule: &[(f64, f64)], cuts: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    compensated_sum(cuts.windows(2).flat_map(|w| {
        let (mid, half) = ((w[0] + w[1]) / 2.0, (w[1] - w[0]) / 2.0);
        let f = &f;
        rule.iter().map(move |&(x, wt)| wt * half * f(mid + half * x))
    }))
}
