//! Sparse multivariate polynomials with real coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A polynomial in `nvars` variables stored as a sorted list of monomials.
///
/// Like terms are merged and zero coefficients dropped on construction, so two
/// polynomials compare equal iff their monomial lists agree.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, [(vec![0; nvars], c)])
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::from_terms(nvars, [(e, 1.0)])
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "monomial arity does not match variable count");
            *merged.entry(e).or_insert(0.0) += c;
        }
        let terms = merged.into_iter().filter(|(_, c)| *c != 0.0).collect();
        Self { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[(Vec<u32>, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(e, _)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Evaluates the polynomial. `x` must have `nvars` entries.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&k, &xi)| if k == 0 { acc } else { acc * xi.powi(k as i32) })
            })
            .sum()
    }

    /// Partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Polynomial {
        assert!(var < self.nvars);
        let terms = self.terms.iter().filter(|(e, _)| e[var] > 0).map(|(e, c)| {
            let mut d = e.clone();
            let k = d[var];
            d[var] -= 1;
            (d, c * k as f64)
        });
        Polynomial::from_terms(self.nvars, terms)
    }

    pub fn powi(&self, k: u32) -> Polynomial {
        (0..k).fold(Polynomial::constant(self.nvars, 1.0), |acc, _| &acc * self)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::from_terms(self.nvars, self.terms.iter().map(|(e, c)| (e.clone(), c * s)))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        Polynomial::from_terms(self.nvars, self.terms.iter().chain(&rhs.terms).cloned())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.push((e, ca * cb));
            }
        }
        Polynomial::from_terms(self.nvars, out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: &Polynomial) -> Polynomial {
                (&self).$m(rhs)
            }
        }
        impl $tr<Polynomial> for &Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, s: f64) -> Polynomial {
        self.scale(s)
    }
}

impl Mul<f64> for Polynomial {
    type Output = Polynomial;
    fn mul(self, s: f64) -> Polynomial {
        self.scale(s)
    }
}

impl Add<f64> for Polynomial {
    type Output = Polynomial;
    fn add(self, c: f64) -> Polynomial {
        let k = Polynomial::constant(self.nvars, c);
        &self + &k
    }
}

impl Sub<f64> for Polynomial {
    type Output = Polynomial;
    fn sub(self, c: f64) -> Polynomial {
        self + (-c)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (v, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{v}")?,
                    _ => write!(f, "*x{v}^{k}")?,
                }
            }
        }
        Ok(())
    }
}
