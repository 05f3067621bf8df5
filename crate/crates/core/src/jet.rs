//! Truncated multivariate Taylor polynomials ("jets") in three variables.
//!
//! A [`Jet`] of order `k` stores the Taylor coefficients `c_α = ∂^α f / α!`
//! of a function of `(x, y, z)` for every multi-index `|α| ≤ k`. Arithmetic
//! truncates at the smaller order of its operands, so any composition of the
//! supported operations evaluated on jets yields exact derivatives up to that
//! order. Two-variable problems simply leave the third variable unused.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 5;
/// Number of monomials of total degree `≤ MAX_ORDER` in three variables.
pub const MAX_LEN: usize = 56;

struct Tables {
    exps: [[u8; 3]; MAX_LEN],
    index: [[[u8; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1],
    len_for_order: [usize; MAX_ORDER + 1],
    // (i, j, k): c_out[k] += a[i] * b[j], sorted by deg(k)
    mul: Vec<(u8, u8, u8)>,
    mul_len_for_order: [usize; MAX_ORDER + 1],
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exps = [[0u8; 3]; MAX_LEN];
        let mut index = [[[u8::MAX; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1];
        let mut len_for_order = [0usize; MAX_ORDER + 1];
        let mut n = 0;
        for deg in 0..=MAX_ORDER {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    let c = deg - a - b;
                    exps[n] = [a as u8, b as u8, c as u8];
                    index[a][b][c] = n as u8;
                    n += 1;
                }
            }
            len_for_order[deg] = n;
        }
        debug_assert_eq!(n, MAX_LEN);
        let deg = |e: [u8; 3]| (e[0] + e[1] + e[2]) as usize;
        let mut mul = Vec::new();
        for i in 0..MAX_LEN {
            for j in 0..MAX_LEN {
                let (ei, ej) = (exps[i], exps[j]);
                if deg(ei) + deg(ej) > MAX_ORDER {
                    continue;
                }
                let k = index[(ei[0] + ej[0]) as usize][(ei[1] + ej[1]) as usize]
                    [(ei[2] + ej[2]) as usize];
                mul.push((i as u8, j as u8, k));
            }
        }
        mul.sort_by_key(|&(_, _, k)| deg(exps[k as usize]));
        let mut mul_len_for_order = [0usize; MAX_ORDER + 1];
        for (o, slot) in mul_len_for_order.iter_mut().enumerate() {
            *slot = mul.iter().filter(|&&(_, _, k)| deg(exps[k as usize]) <= o).count();
        }
        Tables {
            exps,
            index,
            len_for_order,
            mul,
            mul_len_for_order,
        }
    })
}

/// Number of Taylor coefficients carried by a jet of the given order.
pub fn len_for_order(order: usize) -> usize {
    tables().len_for_order[order]
}

/// Multi-index of the `i`-th coefficient in the graded ordering.
pub fn exponent(i: usize) -> [u8; 3] {
    tables().exps[i]
}

/// Position of the multi-index `e` in the graded ordering.
pub fn index_of(e: [usize; 3]) -> usize {
    tables().index[e[0]][e[1]][e[2]] as usize
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Truncated Taylor expansion of a scalar function of three variables.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    order: u8,
    c: [f64; MAX_LEN],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &self.coeffs())
            .finish()
    }
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; MAX_LEN];
        c[0] = value;
        Jet {
            order: order as u8,
            c,
        }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(value: f64, var: usize, order: usize) -> Self {
        let mut j = Self::constant(value, order);
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    /// The three coordinate functions expanded around `x`.
    pub fn point(x: [f64; 3], order: usize) -> [Jet; 3] {
        [
            Self::variable(x[0], 0, order),
            Self::variable(x[1], 1, order),
            Self::variable(x[2], 2, order),
        ]
    }

    /// Zero-based displacement jets `δ_i` (identity map without constant term).
    pub fn displacement(order: usize) -> [Jet; 3] {
        Self::point([0.0; 3], order)
    }

    /// Builds a jet from its leading Taylor coefficients in graded order.
    pub fn from_coeffs(order: usize, coeffs: impl IntoIterator<Item = f64>) -> Self {
        let mut j = Self::constant(0.0, order);
        let n = len_for_order(order);
        for (slot, v) in j.c[..n].iter_mut().zip(coeffs) {
            *slot = v;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..len_for_order(self.order())]
    }

    /// Taylor coefficient of the monomial with multi-index `e`.
    pub fn coeff(&self, e: [usize; 3]) -> f64 {
        if e.iter().sum::<usize>() > self.order() {
            return 0.0;
        }
        self.c[index_of(e)]
    }

    /// Partial derivative `∂^e f` at the expansion point.
    pub fn derivative(&self, e: [usize; 3]) -> f64 {
        self.coeff(e) * e.iter().map(|&k| factorial(k)).product::<f64>()
    }

    pub fn gradient(&self) -> [f64; 3] {
        [self.coeff([1, 0, 0]), self.coeff([0, 1, 0]), self.coeff([0, 0, 1])]
    }

    pub fn hessian(&self) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (a, row) in h.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                let mut e = [0usize; 3];
                e[a] += 1;
                e[b] += 1;
                *entry = self.derivative(e);
            }
        }
        h
    }

    /// Ambient Laplacian at the expansion point.
    pub fn laplacian_value(&self) -> f64 {
        2.0 * (self.coeff([2, 0, 0]) + self.coeff([0, 2, 0]) + self.coeff([0, 0, 2]))
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order());
        let mut out = Jet::constant(0.0, order);
        let n = len_for_order(order);
        out.c[..n].copy_from_slice(&self.c[..n]);
        out
    }

    /// Partial derivative with respect to `var` as a jet of one lower order.
    pub fn diff(&self, var: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order() - 1;
        let mut out = Jet::constant(0.0, order);
        for i in 0..len_for_order(order) {
            let mut e = exponent(i).map(usize::from);
            let power = e[var] + 1;
            e[var] = power;
            out.c[i] = power as f64 * self.c[index_of(e)];
        }
        out
    }

    /// Ambient Laplacian as a jet of order `k - 2`.
    pub fn laplacian(&self) -> Jet {
        let d2 = |v: usize| self.diff(v).diff(v);
        d2(0) + d2(1) + d2(2)
    }

    /// Evaluates this jet as a polynomial in `args`, which must have no
    /// constant term: returns `Σ c_α Π args_i^α_i` truncated consistently.
    pub fn compose(&self, args: &[Jet; 3]) -> Jet {
        let arg_order = args.iter().map(Jet::order).min().unwrap_or(0);
        debug_assert!(args.iter().all(|a| a.value() == 0.0));
        // terms of degree > arg_order vanish because every argument is nilpotent
        let n = len_for_order(self.order().min(arg_order));
        let mut powers: Vec<Jet> = Vec::with_capacity(n);
        let mut out = Jet::constant(self.c[0], arg_order);
        powers.push(Jet::constant(1.0, arg_order));
        for i in 1..n {
            let mut e = exponent(i).map(usize::from);
            let var = e.iter().position(|&k| k > 0).unwrap();
            e[var] -= 1;
            let p = powers[index_of(e)] * args[var];
            if self.c[i] != 0.0 {
                out += p * self.c[i];
            }
            powers.push(p);
        }
        out
    }

    /// Applies a scalar function given its derivatives `f^(k)(a0)` for
    /// `k = 0..=order` at the constant term `a0`.
    fn apply(&self, derivs: &[f64]) -> Jet {
        let order = self.order();
        debug_assert!(derivs.len() > order);
        let mut tail = *self;
        tail.c[0] = 0.0;
        let mut out = Jet::constant(derivs[order] / factorial(order), order);
        for k in (0..order).rev() {
            out = out * tail;
            out.c[0] += derivs[k] / factorial(k);
        }
        out
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.apply(&[s, c, -s, -c, s, c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.apply(&[c, -s, -c, s, c, -s])
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        self.apply(&[e; MAX_ORDER + 1])
    }

    pub fn ln(&self) -> Jet {
        let a = self.c[0];
        let mut d = [a.ln(); MAX_ORDER + 1];
        for (k, slot) in d.iter_mut().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *slot = sign * factorial(k - 1) / a.powi(k as i32);
        }
        self.apply(&d)
    }

    /// Real power `a^p` (requires a positive constant term unless `p` is a
    /// nonnegative integer).
    pub fn powf(&self, p: f64) -> Jet {
        let a = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        let mut falling = 1.0;
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = falling * a.powf(p - k as f64);
            falling *= p - k as f64;
        }
        self.apply(&d)
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..n {
            out = out * *self;
        }
        out
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        let a = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        for (k, slot) in d.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *slot = sign * factorial(k) / a.powi(k as i32 + 1);
        }
        self.apply(&d)
    }

    /// Series of `atan` for a jet without constant term.
    fn atan_nilpotent(q: &Jet) -> Jet {
        let q2 = *q * *q;
        // q - q^3/3 + q^5/5 is exact through order 5
        *q * (1.0 - q2 * (1.0 / 3.0) + q2 * q2 * (1.0 / 5.0))
    }

    pub fn atan(&self) -> Jet {
        let a0 = self.c[0];
        let mut tail = *self;
        tail.c[0] = 0.0;
        // atan(a0 + t) - atan(a0) = atan(t / (1 + a0 (a0 + t)))
        let q = tail / (*self * a0 + 1.0);
        let mut out = Self::atan_nilpotent(&q);
        out.c[0] = a0.atan();
        out
    }

    /// Two-argument arctangent `atan2(self, x)`.
    pub fn atan2(&self, x: &Jet) -> Jet {
        let (y0, x0) = (self.c[0], x.c[0]);
        let num = *x * y0 - *self * x0;
        let den = *x * x0 + *self * y0;
        let mut q = -(num / den);
        q.c[0] = 0.0;
        let mut out = Self::atan_nilpotent(&q);
        out.c[0] = y0.atan2(x0);
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::constant(0.0, order as usize);
        for i in 0..len_for_order(order as usize) {
            out.c[i] = self.c[i] + rhs.c[i];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::constant(0.0, order as usize);
        for i in 0..len_for_order(order as usize) {
            out.c[i] = self.c[i] - rhs.c[i];
        }
        out
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order) as usize;
        let t = tables();
        let mut out = Jet::constant(0.0, order);
        for &(i, j, k) in &t.mul[..t.mul_len_for_order[order]] {
            out.c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for v in self.c.iter_mut() {
            *v *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        rhs.recip() * self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}
