//! Multivariate polynomials and rational functions over exact rationals in
//! named coefficient atoms.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{LazyLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

const KAPPA_LIMIT: u32 = 1 << 10;
const SYMBOL_BASE: u32 = KAPPA_LIMIT * KAPPA_LIMIT;

/// Interned atom handle. κ atoms encode their index directly; named
/// symbols are numbered in interning order after the built-in ones, so
/// ordering (and hence printing) is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(u32);

static SYMBOLS: LazyLock<RwLock<Vec<String>>> = LazyLock::new(|| {
    RwLock::new(
        ["v", "lambda", "tau", "c1", "c1p"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    )
});

impl Atom {
    /// κ with m time and n space indices.
    pub fn kappa(m: u32, n: u32) -> Atom {
        assert!(
            m < KAPPA_LIMIT && n < KAPPA_LIMIT,
            "kappa index out of range"
        );
        Atom(m * KAPPA_LIMIT + n)
    }

    pub fn symbol(name: &str) -> Atom {
        if let Some(i) = SYMBOLS.read().unwrap().iter().position(|s| s == name) {
            return Atom(SYMBOL_BASE + i as u32);
        }
        let mut table = SYMBOLS.write().unwrap();
        if let Some(i) = table.iter().position(|s| s == name) {
            return Atom(SYMBOL_BASE + i as u32);
        }
        table.push(name.to_string());
        Atom(SYMBOL_BASE + (table.len() - 1) as u32)
    }

    pub fn kappa_index(self) -> Option<(u32, u32)> {
        (self.0 < SYMBOL_BASE).then_some((self.0 / KAPPA_LIMIT, self.0 % KAPPA_LIMIT))
    }

    pub fn name(self) -> String {
        match self.kappa_index() {
            Some((m, n)) => kappa_name(m, n),
            None => SYMBOLS.read().unwrap()[(self.0 - SYMBOL_BASE) as usize].clone(),
        }
    }
}

fn kappa_name(m: u32, n: u32) -> String {
    let t = match m {
        0 => String::new(),
        1 => "t".into(),
        2 => "tt".into(),
        _ => format!("{m}t"),
    };
    let z = match n {
        0 => String::new(),
        1..=3 => "z".repeat(n as usize),
        _ => format!("{n}z"),
    };
    format!("k_{t}{z}")
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Product of atom powers, sorted by atom, no zero exponents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(vec![(a, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|p| p.1).sum()
    }

    pub fn exponent(&self, a: Atom) -> u32 {
        self.0.iter().find(|p| p.0 == a).map_or(0, |p| p.1)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// self / other if other divides self.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for &(a, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < a {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == a {
                let f = other.0[j].1;
                if f > e {
                    return None;
                }
                if e > f {
                    out.push((a, e - f));
                }
                j += 1;
            } else {
                out.push((a, e));
            }
        }
        (j == other.0.len()).then_some(Monomial(out))
    }

    pub fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|&(a, e)| {
                    let f = other.exponent(a);
                    (f > 0).then(|| (a, e.min(f)))
                })
                .collect(),
        )
    }

    /// Lexicographic monomial order, largest atom most significant;
    /// compatible with multiplication.
    pub fn lex_cmp(&self, other: &Monomial) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        let (mut i, mut j) = (self.0.len(), other.0.len());
        loop {
            match (i, j) {
                (0, 0) => return Ordering::Equal,
                (0, _) => return Ordering::Less,
                (_, 0) => return Ordering::Greater,
                _ => {}
            }
            let (a, e) = self.0[i - 1];
            let (b, f) = other.0[j - 1];
            match a.cmp(&b).then(e.cmp(&f)) {
                Ordering::Equal => {
                    i -= 1;
                    j -= 1;
                }
                o => return o,
            }
        }
    }

    fn without(&self, a: Atom) -> (u32, Monomial) {
        let e = self.exponent(a);
        (
            e,
            Monomial(self.0.iter().copied().filter(|p| p.0 != a).collect()),
        )
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, e)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Multivariate polynomial with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn integer(c: i64) -> Self {
        Self::constant(BigRational::from_integer(c.into()))
    }

    pub fn atom(a: Atom) -> Self {
        Self::term(BigRational::one(), Monomial::atom(a))
    }

    pub fn term(c: BigRational, m: Monomial) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    /// Leading term under lex order with the largest atom most significant.
    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().max_by(|a, b| a.0.lex_cmp(b.0))
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.mul(m), c.clone()))
                .collect(),
        }
    }

    /// Positive rational g with self/g having coprime integer coefficients.
    pub fn content(&self) -> BigRational {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in self.terms.values() {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        if num.is_zero() {
            BigRational::one()
        } else {
            BigRational::new(num, den)
        }
    }

    /// Greatest common monomial factor of all terms.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |g, m| g.gcd(m))
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::one();
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Exact quotient self / divisor, if the division leaves no remainder.
    pub fn exact_div(&self, divisor: &Polynomial) -> Option<Polynomial> {
        let (lm, lc) = divisor.leading()?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = Polynomial::zero();
        while let Some((m, c)) = rem.leading() {
            let qm = m.div(&lm)?;
            let qc = c / &lc;
            let step = Polynomial::term(qc.clone(), qm.clone());
            rem = &rem - &(&step * divisor);
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Replace atom `a` by the rational function `r`.
    pub fn substitute(&self, a: Atom, r: &RationalCoefficient) -> RationalCoefficient {
        let max_e = self.terms.keys().map(|m| m.exponent(a)).max().unwrap_or(0);
        if max_e == 0 {
            return RationalCoefficient::from_poly(self.clone());
        }
        // Σ_k c_k(rest) a^k = Σ_k c_k num^k den^(E−k) / den^E
        let mut num_pows = vec![Polynomial::one()];
        let mut den_pows = vec![Polynomial::one()];
        for _ in 0..max_e {
            num_pows.push(num_pows.last().unwrap() * &r.num);
            den_pows.push(den_pows.last().unwrap() * &r.den);
        }
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.without(a);
            let e = e as usize;
            let piece = Polynomial::term(c.clone(), rest);
            out = &out + &(&(&piece * &num_pows[e]) * &den_pows[max_e as usize - e]);
        }
        RationalCoefficient::new(out, den_pows[max_e as usize].clone())
            .expect("substitution denominator is a power of a nonzero polynomial")
    }

    pub fn evaluate(&self, value: &impl Fn(Atom) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut x = c.to_f64().unwrap_or(f64::NAN);
                for &(a, e) in m.factors() {
                    x *= value(a).powi(e as i32);
                }
                x
            })
            .sum()
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out: Vec<Atom> = self
            .terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|p| p.0))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

fn fmt_rational(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.is_one() {
                f.write_str(&fmt_rational(&mag))?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rational(&mag))?;
            }
        }
        Ok(())
    }
}

/// Quotient of two polynomials; equality is by cross-multiplication.
#[derive(Debug, Clone)]
pub struct RationalCoefficient {
    num: Polynomial,
    den: Polynomial,
}

impl RationalCoefficient {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Algebra("zero denominator".into()));
        }
        Ok(Self::normalized(num, den))
    }

    pub fn from_poly(p: Polynomial) -> Self {
        Self::normalized(p, Polynomial::one())
    }

    pub fn zero() -> Self {
        Self::from_poly(Polynomial::zero())
    }

    pub fn one() -> Self {
        Self::from_poly(Polynomial::one())
    }

    pub fn integer(c: i64) -> Self {
        Self::from_poly(Polynomial::integer(c))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Self::from_poly(Polynomial::constant(BigRational::new(n.into(), d.into())))
    }

    pub fn atom(a: Atom) -> Self {
        Self::from_poly(Polynomial::atom(a))
    }

    pub fn kappa(m: u32, n: u32) -> Self {
        Self::atom(Atom::kappa(m, n))
    }

    pub fn symbol(name: &str) -> Self {
        Self::atom(Atom::symbol(name))
    }

    pub fn numer(&self) -> &Polynomial {
        &self.num
    }

    pub fn denom(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    fn normalized(num: Polynomial, den: Polynomial) -> Self {
        if num.is_zero() {
            return Self {
                num,
                den: Polynomial::one(),
            };
        }
        let g = num.monomial_content().gcd(&den.monomial_content());
        let (mut num, mut den) = if g.is_one() {
            (num, den)
        } else {
            (
                num.exact_div(&Polynomial::term(BigRational::one(), g.clone()))
                    .unwrap(),
                den.exact_div(&Polynomial::term(BigRational::one(), g))
                    .unwrap(),
            )
        };
        if den.len() > 1 {
            if let Some(q) = num.exact_div(&den) {
                num = q;
                den = Polynomial::one();
            }
        }
        let cd = den.content();
        let sign = if den.leading().unwrap().1.is_negative() {
            -BigRational::one()
        } else {
            BigRational::one()
        };
        let scale = sign / cd;
        num = num.scale(&scale);
        den = den.scale(&scale);
        Self { num, den }
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Algebra("reciprocal of zero".into()));
        }
        Ok(Self::normalized(self.den.clone(), self.num.clone()))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self * &other.recip()?)
    }

    pub fn substitute_atom(&self, a: Atom, r: &RationalCoefficient) -> RationalCoefficient {
        let n = self.num.substitute(a, r);
        let d = self.den.substitute(a, r);
        n.div(&d).expect("substituted denominator vanished")
    }

    pub fn evaluate(&self, value: &impl Fn(Atom) -> f64) -> f64 {
        self.num.evaluate(value) / self.den.evaluate(value)
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut a = self.num.atoms();
        a.extend(self.den.atoms());
        a.sort();
        a.dedup();
        a
    }
}

impl PartialEq for RationalCoefficient {
    fn eq(&self, other: &Self) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        &self.num * &other.den == &other.num * &self.den
    }
}

impl Eq for RationalCoefficient {}

impl Add for &RationalCoefficient {
    type Output = RationalCoefficient;
    fn add(self, rhs: &RationalCoefficient) -> RationalCoefficient {
        if self.den == rhs.den {
            return RationalCoefficient::normalized(&self.num + &rhs.num, self.den.clone());
        }
        RationalCoefficient::normalized(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl Sub for &RationalCoefficient {
    type Output = RationalCoefficient;
    fn sub(self, rhs: &RationalCoefficient) -> RationalCoefficient {
        self + &(-rhs)
    }
}

impl Mul for &RationalCoefficient {
    type Output = RationalCoefficient;
    fn mul(self, rhs: &RationalCoefficient) -> RationalCoefficient {
        if self.is_zero() || rhs.is_zero() {
            return RationalCoefficient::zero();
        }
        RationalCoefficient::normalized(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Neg for &RationalCoefficient {
    type Output = RationalCoefficient;
    fn neg(self) -> RationalCoefficient {
        RationalCoefficient {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident, $t:ty) => {
        impl $tr for $t {
            type Output = $t;
            fn $m(self, rhs: $t) -> $t {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add, Polynomial);
forward_owned!(Sub, sub, Polynomial);
forward_owned!(Mul, mul, Polynomial);
forward_owned!(Add, add, RationalCoefficient);
forward_owned!(Sub, sub, RationalCoefficient);
forward_owned!(Mul, mul, RationalCoefficient);

impl Neg for RationalCoefficient {
    type Output = RationalCoefficient;
    fn neg(self) -> RationalCoefficient {
        -&self
    }
}

impl fmt::Display for RationalCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.as_constant().is_some_and(|c| c.is_one()) {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &Polynomial| {
            if p.len() > 1 {
                format!("({p})")
            } else {
                p.to_string()
            }
        };
        write!(f, "{}/{}", wrap(&self.num), wrap(&self.den))
    }
}
