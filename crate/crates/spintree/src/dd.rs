//! Minimal double-double arithmetic.
//!
//! The literal closed-form expression for the plane map divides power sums
//! by up to the fourth power of `y*theta`; near the removable singularity
//! the individual terms exceed the result by many orders of magnitude and
//! plain f64 evaluation loses most of its digits. Evaluating the same
//! expression in double-double keeps the rounding error at one ulp of the
//! final value. Only the handful of operations that path needs are
//! implemented.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Self { hi, lo }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }

    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn mul(self, other: Self) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    pub fn div(self, other: Self) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from_f64(q1)));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul(Dd::from_f64(q2)));
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from_f64(q3))
    }

    pub fn scale(self, s: f64) -> Self {
        self.mul(Dd::from_f64(s))
    }

    pub fn powi(self, n: usize) -> Self {
        let mut acc = Dd::from_f64(1.0);
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            n >>= 1;
        }
        acc
    }
}

/// `2^(1/3)` to double-double accuracy via one Newton step off the f64 seed.
pub(crate) fn cbrt2_dd() -> Dd {
    let seed = Dd::from_f64(2.0_f64.cbrt());
    // r - (r^3 - 2) / (3 r^2)
    let r3 = seed.powi(3);
    let num = r3.sub(Dd::from_f64(2.0));
    let den = seed.powi(2).scale(3.0);
    seed.sub(num.div(den))
}
