//! Numeric backends for the closed forms.
//!
//! Every closed form in this crate is a sum of terms, each a product of
//! powers of `p` and `q`, small rationals and integers coming from binomial
//! coefficients. A term is described once as a [`TermFactors`] and evaluated
//! by an [`Arith`] backend: [`StableFloat`] runs the interleaved product
//! kernel ([`stable_term_product`]), [`Exact`] multiplies big rationals.

use alloc::vec::Vec;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::params::DesignParams;

/// Largest `n` accepted by [`NumericMode::ExactRational`].
pub const MAX_EXACT_N: usize = 256;

/// Default underflow guard `m` of the product kernel.
pub const DEFAULT_UNDERFLOW_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumericMode {
    /// `f64` with the interleaved product kernel. `overflow_cap: None` means
    /// `M = 4n` for a computation at size `n`.
    Float64Stable {
        overflow_cap: Option<f64>,
        underflow_guard: f64,
    },
    /// Big-rational arithmetic; needs `p` as a ratio and `n <= MAX_EXACT_N`.
    ExactRational,
}

impl Default for NumericMode {
    fn default() -> Self {
        Self::stable()
    }
}

impl NumericMode {
    pub const fn stable() -> Self {
        Self::Float64Stable {
            overflow_cap: None,
            underflow_guard: DEFAULT_UNDERFLOW_GUARD,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Self::ExactRational)
    }

    /// Resolved guards for a computation at size `n`.
    pub fn guards(&self, n: usize) -> Result<Guards> {
        match *self {
            Self::Float64Stable {
                overflow_cap,
                underflow_guard,
            } => {
                let cap = overflow_cap.unwrap_or_else(|| Guards::for_size(n).overflow_cap);
                if !(cap > 2.0 * n as f64) {
                    return Err(Error::InvalidGuard {
                        cap,
                        twice_n: 2 * n,
                    });
                }
                if !(underflow_guard > 0.0 && underflow_guard < 1.0) {
                    return Err(Error::InvalidArgument("underflow guard must lie in (0, 1)"));
                }
                Ok(Guards {
                    overflow_cap: cap,
                    underflow_guard,
                })
            }
            Self::ExactRational => Ok(Guards::for_size(n)),
        }
    }
}

/// Overflow cap `M` and underflow guard `m` of [`stable_term_product`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guards {
    pub overflow_cap: f64,
    pub underflow_guard: f64,
}

impl Guards {
    pub fn for_size(n: usize) -> Self {
        Self {
            overflow_cap: 4.0 * n.max(1) as f64,
            underflow_guard: DEFAULT_UNDERFLOW_GUARD,
        }
    }
}

/// A product kept as an ordered list of sub-products whose product may not be
/// representable as a single `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredProduct {
    parts: Vec<f64>,
}

impl FactoredProduct {
    pub fn zero() -> Self {
        Self {
            parts: alloc::vec![0.0],
        }
    }

    pub fn parts(&self) -> &[f64] {
        &self.parts
    }

    /// True when the kernel had to split the result below the underflow guard.
    pub fn is_split(&self) -> bool {
        self.parts.len() > 1
    }

    /// The plain `f64` value, which may underflow to zero when split.
    pub fn value(&self) -> f64 {
        self.parts.iter().product()
    }

    pub fn to_scaled(&self) -> Scaled {
        self.parts
            .iter()
            .fold(Scaled::one(), |acc, &x| acc * Scaled::from_f64(x))
    }
}

/// `mantissa * 2^exponent` with `mantissa` in `[0.5, 1)` (or zero); used to
/// sum terms that individually fall outside the `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    mantissa: f64,
    exponent: i64,
}

impl Scaled {
    pub fn zero() -> Self {
        Self {
            mantissa: 0.0,
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Self::from_f64(1.0)
    }

    pub fn from_f64(x: f64) -> Self {
        let (m, e) = libm::frexp(x);
        Self {
            mantissa: m,
            exponent: if m == 0.0 { 0 } else { e as i64 },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// `log2` of the value; `-inf` for zero.
    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            libm::log2(self.mantissa) + self.exponent as f64
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let e = self.exponent.clamp(-2000, 2000) as i32;
        libm::ldexp(self.mantissa, e)
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, rhs: Scaled) -> Scaled {
        let (m, e) = libm::frexp(self.mantissa * rhs.mantissa);
        if m == 0.0 {
            return Scaled::zero();
        }
        Scaled {
            mantissa: m,
            exponent: self.exponent + rhs.exponent + e as i64,
        }
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, rhs: Scaled) -> Scaled {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = lo.exponent - hi.exponent;
        if shift < -1100 {
            return hi;
        }
        let (m, e) = libm::frexp(hi.mantissa + libm::ldexp(lo.mantissa, shift as i32));
        Scaled {
            mantissa: m,
            exponent: hi.exponent + e as i64,
        }
    }
}

/// Multiplies `small` factors (in `[0, 1]`) and `large` factors (`>= 1`)
/// so that the running product stays in a safe range.
///
/// Large factors are consumed until the running product exceeds `M`, then
/// small factors (largest first) until it drops below `M`, repeating until
/// the large factors are used up. The remaining small factors are applied
/// largest first; whenever the next multiplication would go below `m` the
/// running product is stored and a new one started.
pub fn stable_term_product(small: &[f64], large: &[f64], guards: &Guards) -> FactoredProduct {
    if small.iter().chain(large).any(|&x| x == 0.0) {
        return FactoredProduct::zero();
    }
    let mut small: Vec<f64> = small.to_vec();
    small.sort_unstable_by(|a, b| b.total_cmp(a));
    let cap = guards.overflow_cap;

    let mut running = 1.0;
    let mut si = 0;
    let mut li = 0;
    while li < large.len() {
        while li < large.len() && (running <= cap || si == small.len()) {
            running *= large[li];
            li += 1;
        }
        while running >= cap && si < small.len() {
            running *= small[si];
            si += 1;
        }
    }

    let mut parts = Vec::new();
    for &a in &small[si..] {
        let next = running * a;
        if next < guards.underflow_guard {
            parts.push(running);
            running = a;
        } else {
            running = next;
        }
    }
    parts.push(running);
    FactoredProduct { parts }
}

/// Factor list of one term of a closed form: `p^p_power * q^q_power *
/// prod(num/den) * prod(integers)`. Ratios are at most one, integers at
/// least one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermFactors {
    pub p_power: u32,
    pub q_power: u32,
    pub ratios: Vec<(u64, u64)>,
    pub integers: Vec<u64>,
}

impl TermFactors {
    pub fn new(p_power: u32, q_power: u32) -> Self {
        Self {
            p_power,
            q_power,
            ..Self::default()
        }
    }

    pub fn ratio(mut self, num: u64, den: u64) -> Self {
        debug_assert!(num <= den && den > 0);
        self.ratios.push((num, den));
        self
    }

    /// Appends `C(base + l, l) = prod_{i=1..l} (base + i) / i`.
    pub fn binomial(mut self, base: u64, l: u64) -> Self {
        for i in 1..=l {
            self.integers.push(base + i);
            if i > 1 {
                self.ratios.push((1, i));
            }
        }
        self
    }

    /// Number of factors below one (counting each power of `p` and `q`).
    pub fn small_count(&self) -> usize {
        self.p_power as usize + self.q_power as usize + self.ratios.len()
    }

    pub fn large_count(&self) -> usize {
        self.integers.len()
    }

    pub fn small_factors(&self, params: &DesignParams) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.small_count());
        out.extend(core::iter::repeat_n(params.p(), self.p_power as usize));
        out.extend(core::iter::repeat_n(params.q(), self.q_power as usize));
        out.extend(self.ratios.iter().map(|&(n, d)| n as f64 / d as f64));
        out
    }

    pub fn large_factors(&self) -> Vec<f64> {
        self.integers.iter().map(|&x| x as f64).collect()
    }

    pub fn eval_stable(&self, params: &DesignParams, guards: &Guards) -> FactoredProduct {
        stable_term_product(&self.small_factors(params), &self.large_factors(), guards)
    }

    pub fn eval_exact(&self, p: &BigRational, q: &BigRational) -> BigRational {
        let mut num = p.numer().pow(self.p_power) * q.numer().pow(self.q_power);
        let mut den = p.denom().pow(self.p_power) * q.denom().pow(self.q_power);
        for &(n, d) in &self.ratios {
            num *= BigInt::from(n);
            den *= BigInt::from(d);
        }
        for &x in &self.integers {
            num *= BigInt::from(x);
        }
        BigRational::new(num, den)
    }
}

/// `C(x, y)` with the convention that it is zero when `x < 0`, `y < 0` or
/// `x < y`.
pub fn binomial(x: i64, y: i64) -> BigUint {
    if x < 0 || y < 0 || x < y {
        return BigUint::zero();
    }
    let y = y.min(x - y) as u64;
    let x = x as u64;
    let mut acc = BigUint::one();
    for i in 1..=y {
        acc = acc * BigUint::from(x - y + i) / BigUint::from(i);
    }
    acc
}

/// Arithmetic backend for the closed forms.
pub trait Arith {
    type Value: Clone
        + PartialOrd
        + Zero
        + One
        + Add<Output = Self::Value>
        + Sub<Output = Self::Value>
        + Mul<Output = Self::Value>
        + Div<Output = Self::Value>
        + Neg<Output = Self::Value>;

    fn params(&self) -> &DesignParams;
    fn p(&self) -> Self::Value;
    fn q(&self) -> Self::Value;
    fn constant(&self, num: i64, den: u64) -> Self::Value;
    fn term(&self, t: &TermFactors) -> Self::Value;
    fn to_f64(&self, v: &Self::Value) -> f64;

    fn sum_terms<I: IntoIterator<Item = TermFactors>>(&self, terms: I) -> Self::Value {
        terms
            .into_iter()
            .fold(Self::Value::zero(), |acc, t| acc + self.term(&t))
    }

    fn half(&self) -> Self::Value {
        self.constant(1, 2)
    }

    /// `t_k`: probability of assigning A when the current imbalance is `k`.
    fn transition(&self, k: i64) -> Self::Value {
        match k.signum() {
            0 => self.half(),
            1 => self.q(),
            _ => self.p(),
        }
    }
}

/// `f64` backend using [`stable_term_product`] per term and scaled summation.
#[derive(Debug, Clone, Copy)]
pub struct StableFloat {
    params: DesignParams,
    guards: Guards,
}

impl StableFloat {
    pub fn new(params: DesignParams, guards: Guards) -> Self {
        Self { params, guards }
    }

    pub fn for_size(params: DesignParams, n: usize) -> Self {
        Self::new(params, Guards::for_size(n))
    }
}

impl Arith for StableFloat {
    type Value = f64;

    fn params(&self) -> &DesignParams {
        &self.params
    }
    fn p(&self) -> f64 {
        self.params.p()
    }
    fn q(&self) -> f64 {
        self.params.q()
    }
    fn constant(&self, num: i64, den: u64) -> f64 {
        num as f64 / den as f64
    }
    fn term(&self, t: &TermFactors) -> f64 {
        t.eval_stable(&self.params, &self.guards)
            .to_scaled()
            .to_f64()
    }
    fn to_f64(&self, v: &f64) -> f64 {
        *v
    }

    fn sum_terms<I: IntoIterator<Item = TermFactors>>(&self, terms: I) -> f64 {
        terms
            .into_iter()
            .fold(Scaled::zero(), |acc, t| {
                acc + t.eval_stable(&self.params, &self.guards).to_scaled()
            })
            .to_f64()
    }
}

/// Big-rational backend.
#[derive(Debug, Clone)]
pub struct Exact {
    params: DesignParams,
    p: BigRational,
    q: BigRational,
}

impl Exact {
    pub fn new(params: DesignParams) -> Result<Self> {
        Ok(Self {
            p: params.p_exact()?,
            q: params.q_exact()?,
            params,
        })
    }

    /// Like [`Exact::new`] but also enforces [`MAX_EXACT_N`].
    pub fn for_size(params: DesignParams, n: usize) -> Result<Self> {
        if n > MAX_EXACT_N {
            return Err(Error::ExactSizeExceeded {
                n,
                cap: MAX_EXACT_N,
            });
        }
        Self::new(params)
    }
}

impl Arith for Exact {
    type Value = BigRational;

    fn params(&self) -> &DesignParams {
        &self.params
    }
    fn p(&self) -> BigRational {
        self.p.clone()
    }
    fn q(&self) -> BigRational {
        self.q.clone()
    }
    fn constant(&self, num: i64, den: u64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn term(&self, t: &TermFactors) -> BigRational {
        t.eval_exact(&self.p, &self.q)
    }
    fn to_f64(&self, v: &BigRational) -> f64 {
        v.to_f64().unwrap_or(f64::NAN)
    }
}
