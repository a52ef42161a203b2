//! Alternating binomial sum for `L_n`:
//!
//! `L_n = 1 + Σ_{i=2}^{n} C(n,i) (−1)^i (i − 1 + r·i(i−1)/2) / (1 − pⁱ − qⁱ)`.
//!
//! The terms grow like `2ⁿ` while the sum stays near `n`, so plain `f64`
//! loses about six digits by `n = 30`. Terms are evaluated and summed in
//! double-double arithmetic and a running error bound decides whether the
//! result can be trusted.

use super::{AnalyticsError, SplitParams};

/// Largest accepted error bound on the returned value.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-9;

/// Unit roundoff of double-double arithmetic.
const DD_EPS: f64 = 1.0 / (1u128 << 104) as f64;

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
        quick_two_sum(p, e)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn abs(self) -> f64 {
        self.hi.abs()
    }
}

/// `L_n` from the closed form and an upper bound on its absolute error.
pub fn expected_cri_closed_with_bound(n: u64, params: SplitParams) -> Result<(f64, f64), AnalyticsError> {
    let p = Dd::from(params.p);
    let q = Dd::ONE.sub(p);
    // r = 2 − 4pq − 3(p² + q²) = 2pq − 1
    let pq = p.mul(q);
    let r = pq.add(pq).sub(Dd::ONE);

    let mut sum = Dd::ONE;
    let mut magnitude = 1.0;
    let mut bound = 0.0;
    let mut binom = Dd::from(n as f64);
    let mut p_pow = p;
    let mut q_pow = q;
    for i in 2..=n {
        // C(n, i) from C(n, i−1); exact while it fits in 53 bits, and
        // carried in double-double beyond that
        binom = binom.mul(Dd::from((n - i + 1) as f64)).div(Dd::from(i as f64));
        p_pow = p_pow.mul(p);
        q_pow = q_pow.mul(q);
        let fi = i as f64;
        let numer = Dd::from(fi - 1.0).add(r.mul(Dd::from(fi * (fi - 1.0) / 2.0)));
        let denom = Dd::ONE.sub(p_pow).sub(q_pow);
        let mut term = binom.mul(numer).div(denom);
        if i % 2 == 1 {
            term = term.neg();
        }
        sum = sum.add(term);
        magnitude += term.abs();
        // each term passes through O(i) roundings (powers and binomial)
        bound += term.abs() * (8.0 * fi + 16.0) * DD_EPS;
    }
    bound += magnitude * (n as f64 + 2.0) * DD_EPS;
    let value = sum.hi + sum.lo;
    bound += value.abs() * f64::EPSILON;
    Ok((value, bound))
}

/// `L_n` from the closed form, or [`AnalyticsError::PrecisionLoss`] when
/// the error bound exceeds [`CLOSED_FORM_TOLERANCE`].
pub fn expected_cri_closed(n: u64, params: SplitParams) -> Result<f64, AnalyticsError> {
    let (value, bound) = expected_cri_closed_with_bound(n, params)?;
    if bound > CLOSED_FORM_TOLERANCE {
        return Err(AnalyticsError::PrecisionLoss {
            n,
            bound,
            limit: CLOSED_FORM_TOLERANCE,
        });
    }
    Ok(value)
}
