//! Equations for the isotropic distribution function
//! ∂F/∂t = Σ c_{m,n} ∂^{m+n}F/∂t^m∂z^n and the derivative iterative
//! operations that rewrite them.

pub mod rational;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use rational::{Atom, Monomial, Polynomial, RationalCoefficient};

/// Derivative order ∂^{m+n}/∂t^m∂z^n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub m: u32,
    pub n: u32,
}

impl MultiIndex {
    pub const fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }

    /// Twice the grading weight m + n/2.
    pub fn weight2(self) -> u32 {
        2 * self.m + self.n
    }

    pub fn shifted(self, a: u32, b: u32) -> Self {
        Self::new(self.m + a, self.n + b)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.m, self.n)
    }
}

impl std::str::FromStr for MultiIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("index must look like \"m,n\", got {s:?}"));
        let (m, n) = s.split_once(',').ok_or_else(bad)?;
        Ok(Self::new(
            m.trim().parse().map_err(|_| bad())?,
            n.trim().parse().map_err(|_| bad())?,
        ))
    }
}

pub type Terms = BTreeMap<MultiIndex, RationalCoefficient>;

const LHS: MultiIndex = MultiIndex::new(1, 0);

#[derive(Debug, Clone, PartialEq)]
pub struct Eidf {
    terms: Terms,
    max_weight: u32,
}

impl Eidf {
    /// Build from explicit terms; zero coefficients are dropped and terms
    /// beyond the weight budget are truncated.
    pub fn from_terms(terms: Terms, max_weight: u32) -> Result<Self> {
        if terms.contains_key(&MultiIndex::new(0, 0)) || terms.contains_key(&LHS) {
            return Err(Error::Algebra(
                "an EIDF has no (0,0) or (1,0) right-hand term".into(),
            ));
        }
        let mut e = Self { terms, max_weight };
        e.tidy();
        Ok(e)
    }

    fn tidy(&mut self) {
        let w = 2 * self.max_weight;
        self.terms.retain(|k, c| k.weight2() <= w && !c.is_zero());
    }

    pub fn max_weight(&self) -> u32 {
        self.max_weight
    }

    pub fn terms(&self) -> &Terms {
        &self.terms
    }

    pub fn coefficient(&self, idx: MultiIndex) -> RationalCoefficient {
        self.terms
            .get(&idx)
            .cloned()
            .unwrap_or_else(RationalCoefficient::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same terms under a new weight budget.
    pub fn retruncated(&self, max_weight: u32) -> Self {
        let mut e = Self {
            terms: self.terms.clone(),
            max_weight,
        };
        e.tidy();
        e
    }

    /// Multiply every coefficient by `c`.
    pub fn scaled(&self, c: &RationalCoefficient) -> Self {
        let mut e = Self {
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
            max_weight: self.max_weight,
        };
        e.tidy();
        e
    }
}

impl fmt::Display for Eidf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_equation(f, LHS, &self.terms)
    }
}

fn derivative_symbol(idx: MultiIndex) -> String {
    let part = |k: u32, v: &str| match k {
        0 => String::new(),
        1 => format!("d{v}"),
        _ => format!("d{v}^{k}"),
    };
    let t = part(idx.m, "t");
    let z = part(idx.n, "z");
    let sep = if !t.is_empty() && !z.is_empty() {
        " "
    } else {
        ""
    };
    format!("[{t}{sep}{z}]F")
}

fn write_equation(f: &mut fmt::Formatter<'_>, lhs: MultiIndex, terms: &Terms) -> fmt::Result {
    write!(f, "{} =", derivative_symbol(lhs))?;
    if terms.is_empty() {
        return f.write_str(" 0");
    }
    for (i, (k, c)) in terms.iter().enumerate() {
        let sep = if i == 0 { " " } else { "\n    + " };
        write!(f, "{sep}({c}) {}", derivative_symbol(*k))?;
    }
    Ok(())
}

/// Canonical generic EIDF: −κ_z at (0,1), +κ_{m,n} elsewhere, all (m,n)
/// with n ≥ 1 and m + n/2 ≤ `max_weight`.
///
/// Keys with n = 0 are absent: integrating the equation over z must
/// conserve particles, which rules out pure time-derivative terms in the
/// canonical form.
pub fn canonical_focusing_eidf(max_weight: u32) -> Result<Eidf> {
    if max_weight < 2 {
        return Err(Error::Algebra(format!(
            "max_weight must be >= 2, got {max_weight}"
        )));
    }
    let mut terms = Terms::new();
    for m in 0..=max_weight {
        for n in 1..=2 * (max_weight - m) {
            let c = RationalCoefficient::kappa(m, n);
            let c = if (m, n) == (0, 1) { -&c } else { c };
            terms.insert(MultiIndex::new(m, n), c);
        }
    }
    Eidf::from_terms(terms, max_weight)
}

/// Second-order BGK equation: vλ/3 at (0,2), −2λ²/3 at (1,2), vλ³/5 at (0,4).
pub fn bgk_second_order_eidf() -> Eidf {
    let v = RationalCoefficient::symbol("v");
    let l = RationalCoefficient::symbol("lambda");
    let l2 = &l * &l;
    let mut terms = Terms::new();
    terms.insert(
        MultiIndex::new(0, 2),
        &(&v * &l) * &RationalCoefficient::ratio(1, 3),
    );
    terms.insert(
        MultiIndex::new(1, 2),
        &l2 * &RationalCoefficient::ratio(-2, 3),
    );
    terms.insert(
        MultiIndex::new(0, 4),
        &(&v * &(&l2 * &l)) * &RationalCoefficient::ratio(1, 5),
    );
    Eidf::from_terms(terms, 2).expect("static BGK terms are valid")
}

/// ∂^{a+b}/∂t^a∂z^b applied to both sides of an EIDF.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedEquation {
    pub lhs: MultiIndex,
    pub terms: Terms,
}

impl DerivedEquation {
    /// Apply a further ∂^{a+b}/∂t^a∂z^b to both sides.
    pub fn differentiate(&self, a: u32, b: u32) -> Self {
        Self {
            lhs: self.lhs.shifted(a, b),
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.shifted(a, b), c.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for DerivedEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_equation(f, self.lhs, &self.terms)
    }
}

pub fn apply_derivative(eidf: &Eidf, a: u32, b: u32) -> Result<DerivedEquation> {
    if (a, b) == (0, 0) {
        return Err(Error::Algebra(
            "derivative order (0,0) is not an operation".into(),
        ));
    }
    Ok(DerivedEquation {
        lhs: LHS.shifted(a, b),
        terms: eidf
            .terms
            .iter()
            .map(|(k, c)| (k.shifted(a, b), c.clone()))
            .collect(),
    })
}

/// Solve a derived equation for one derivative. The returned map expresses
/// ∂^target F as a combination of the remaining derivatives, including
/// the equation's left-hand side.
pub fn solve_for(eq: &DerivedEquation, target: MultiIndex) -> Result<Terms> {
    if target == eq.lhs {
        return Ok(eq.terms.clone());
    }
    let c = eq
        .terms
        .get(&target)
        .filter(|c| !c.is_zero())
        .ok_or_else(|| Error::Algebra(format!("target ({target}) absent from derived equation")))?;
    let inv = c.recip()?;
    let mut out = Terms::new();
    out.insert(eq.lhs, inv.clone());
    for (k, ck) in &eq.terms {
        if *k != target {
            out.insert(*k, -&(ck * &inv));
        }
    }
    Ok(out)
}

/// Replace the `target` term of `eidf` by `expression`, restore the
/// canonical (1,0) left-hand side and truncate.
pub fn substitute(eidf: &Eidf, target: MultiIndex, expression: &Terms) -> Result<Eidf> {
    let c = eidf
        .terms
        .get(&target)
        .cloned()
        .ok_or_else(|| Error::Algebra(format!("target ({target}) absent from EIDF")))?;
    if expression.contains_key(&target) {
        return Err(Error::Algebra(format!(
            "expression for ({target}) refers to itself"
        )));
    }
    let mut terms = eidf.terms.clone();
    terms.remove(&target);
    let limit = 2 * eidf.max_weight;
    for (k, e) in expression {
        if k.weight2() > limit && *k != LHS {
            continue;
        }
        let add = &c * e;
        let slot = terms.entry(*k).or_insert_with(RationalCoefficient::zero);
        *slot = &*slot + &add;
    }
    if let Some(c10) = terms.remove(&LHS) {
        let denom = &RationalCoefficient::one() - &c10;
        if denom.is_zero() {
            return Err(Error::Algebra(
                "left-hand coefficient cancels exactly".into(),
            ));
        }
        let inv = denom.recip()?;
        for v in terms.values_mut() {
            *v = &*v * &inv;
        }
    }
    terms.retain(|_, v| !v.is_zero());
    Eidf::from_terms(terms, eidf.max_weight)
}

/// Coefficient of ∂²F/∂z².
pub fn fick_coefficient(eidf: &Eidf) -> RationalCoefficient {
    eidf.coefficient(MultiIndex::new(0, 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    PzI,
    PtI,
    PtzI,
}

/// One DIO: differentiate by (a,b), solve for `target`, substitute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DioStep {
    pub family: Family,
    pub a: u32,
    pub b: u32,
    #[serde(with = "index_string")]
    pub target: MultiIndex,
}

mod index_string {
    use super::MultiIndex;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(idx: &MultiIndex, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&idx.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MultiIndex, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl DioStep {
    pub fn new(family: Family, a: u32, b: u32, target: (u32, u32)) -> Result<Self> {
        let ok = match family {
            Family::PzI => a == 0 && b >= 1,
            Family::PtI => a >= 1 && b == 0,
            Family::PtzI => a >= 1 && b >= 1,
        };
        if !ok {
            return Err(Error::Config(format!(
                "derivative ({a},{b}) does not belong to family {family:?}"
            )));
        }
        Ok(Self {
            family,
            a,
            b,
            target: MultiIndex::new(target.0, target.1),
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.family, self.a, self.b, (self.target.m, self.target.n)).map(|_| ())
    }

    pub fn apply(&self, eidf: &Eidf) -> Result<Eidf> {
        self.validate()?;
        let eq = apply_derivative(eidf, self.a, self.b)?;
        let expr = solve_for(&eq, self.target)?;
        substitute(eidf, self.target, &expr)
    }
}

impl fmt::Display for DioStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}({},{}) target {}",
            self.family,
            self.a,
            self.b,
            Atom::kappa(self.target.m, self.target.n)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub name: String,
    pub steps: Vec<DioStep>,
}

/// Eidf after every step, starting with the input.
pub fn run_script(eidf: &Eidf, steps: &[DioStep]) -> Result<Vec<Eidf>> {
    let mut out = vec![eidf.clone()];
    for s in steps {
        let next = s.apply(out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// How the Fick coefficient is expected to respond to a script.
#[derive(Debug, Clone, PartialEq)]
pub enum FickExpectation {
    Unchanged,
    Becomes(RationalCoefficient),
}

/// The named DIO scripts with the weight budget each needs and the
/// expected Fick coefficient afterwards.
pub fn named_scripts() -> Vec<(Script, u32, FickExpectation)> {
    let k = RationalCoefficient::kappa;
    let step = |f, a, b, t| DioStep::new(f, a, b, t).expect("static step is valid");
    let one = |name: String, s: DioStep| Script {
        name,
        steps: vec![s],
    };
    let mut out = Vec::new();

    out.push((
        one("R_tz of 1st PzI".into(), step(Family::PzI, 0, 1, (1, 1))),
        4,
        FickExpectation::Becomes(&k(0, 2) - &(&k(1, 1) * &k(0, 1))),
    ));
    // R_{i t (j+1) z} of the 1st PzI; the (0,2) -> (0,3) case is R_zzz.
    for (i, j) in [(0, 2), (1, 1), (2, 1), (1, 2), (0, 3)] {
        let fl = &k(0, 2) + &(&k(i, j + 1) * &k(0, 1)).div(&k(i, j)).unwrap();
        out.push((
            one(
                format!(
                    "R_{} of 1st PzI",
                    Atom::kappa(i, j + 1).name().trim_start_matches("k_")
                ),
                step(Family::PzI, 0, 1, (i, j + 1)),
            ),
            4,
            FickExpectation::Becomes(fl),
        ));
    }
    out.push((
        one("R_tzz of 2nd PzI".into(), step(Family::PzI, 0, 2, (1, 2))),
        4,
        FickExpectation::Unchanged,
    ));
    for t in [(1, 3), (2, 3), (0, 4), (1, 4), (0, 5)] {
        out.push((
            one(
                format!("R_{} of 2nd PzI", short(t)),
                step(Family::PzI, 0, 2, t),
            ),
            4,
            FickExpectation::Unchanged,
        ));
    }
    for t in [(2, 1), (1, 2), (2, 2)] {
        out.push((
            one(
                format!("R_{} of 1st PtzI", short(t)),
                step(Family::PtzI, 1, 1, t),
            ),
            4,
            FickExpectation::Unchanged,
        ));
    }
    for t in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (1, 3)] {
        out.push((
            one(
                format!("R_{} of 1st PtI", short(t)),
                step(Family::PtI, 1, 0, t),
            ),
            4,
            FickExpectation::Unchanged,
        ));
    }
    for t in [(2, 1), (2, 2)] {
        out.push((
            one(
                format!("R_{} of 2nd PtI", short(t)),
                step(Family::PtI, 2, 0, t),
            ),
            4,
            FickExpectation::Unchanged,
        ));
    }
    out.push((
        one("R_tttz of 3rd PtI".into(), step(Family::PtI, 3, 0, (3, 1))),
        4,
        FickExpectation::Unchanged,
    ));
    for i in 1..=4 {
        // κ_{4tz} has weight 9/2, so the i = 4 case needs a budget of 5.
        let w = if i == 4 { 5 } else { 4 };
        out.push((
            one(
                format!("R_{} of PtI order {i}", short((i, 1))),
                step(Family::PtI, i, 0, (i, 1)),
            ),
            w,
            FickExpectation::Unchanged,
        ));
    }
    for i in 2..=3 {
        out.push((
            Script {
                name: format!("R_tz of 1st PtI + R_{} of PtI order {i}", short((i, 1))),
                steps: vec![
                    step(Family::PtI, 1, 0, (1, 1)),
                    step(Family::PtI, i, 0, (i, 1)),
                ],
            },
            4,
            FickExpectation::Unchanged,
        ));
    }
    out
}

fn short(t: (u32, u32)) -> String {
    Atom::kappa(t.0, t.1)
        .name()
        .trim_start_matches("k_")
        .to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GombosiTranscript {
    pub start: Eidf,
    pub after_pzi: Eidf,
    pub after_pti: Eidf,
    /// after_pti with λ eliminated in favour of τ = λ/v.
    pub telegraph: BTreeMap<MultiIndex, RationalCoefficient>,
}

/// 2nd-order PzI (eliminating ∂⁴F/∂z⁴) then 1st-order PtI (eliminating
/// ∂³F/∂t∂z²) on the second-order BGK equation, truncated at weight 2.
pub fn gombosi_roundtrip() -> Result<GombosiTranscript> {
    let start = bgk_second_order_eidf();
    let after_pzi = DioStep::new(Family::PzI, 0, 2, (0, 4))?.apply(&start)?;
    let after_pti = DioStep::new(Family::PtI, 1, 0, (1, 2))?.apply(&after_pzi)?;
    let lambda = Atom::symbol("lambda");
    let tau_v = &RationalCoefficient::symbol("tau") * &RationalCoefficient::symbol("v");
    let telegraph = after_pti
        .terms()
        .iter()
        .map(|(k, c)| (*k, c.substitute_atom(lambda, &tau_v)))
        .collect();
    Ok(GombosiTranscript {
        start,
        after_pzi,
        after_pti,
        telegraph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(m: u32, n: u32) -> RationalCoefficient {
        RationalCoefficient::kappa(m, n)
    }

    #[test]
    fn canonical_layout() {
        let e = canonical_focusing_eidf(4).unwrap();
        assert_eq!(e.coefficient(MultiIndex::new(0, 1)), -&k(0, 1));
        assert_eq!(e.coefficient(MultiIndex::new(1, 1)), k(1, 1));
        assert_eq!(e.len(), 20);
        assert_eq!(canonical_focusing_eidf(2).unwrap().len(), 6);
        assert!(canonical_focusing_eidf(1).is_err());
        assert!(e.terms().keys().all(|k| k.n >= 1 && k.weight2() <= 8));
    }

    #[test]
    fn bgk_layout() {
        let e = bgk_second_order_eidf();
        let v = RationalCoefficient::symbol("v");
        let l = RationalCoefficient::symbol("lambda");
        assert_eq!(
            e.coefficient(MultiIndex::new(0, 2)),
            &(&v * &l) * &RationalCoefficient::ratio(1, 3)
        );
        assert_eq!(
            e.coefficient(MultiIndex::new(1, 2)),
            &(&l * &l) * &RationalCoefficient::ratio(-2, 3)
        );
        assert!(e.coefficient(MultiIndex::new(0, 3)).is_zero());
    }

    #[test]
    fn derivative_shift() {
        let e = canonical_focusing_eidf(4).unwrap();
        let d = apply_derivative(&e, 0, 1).unwrap();
        assert_eq!(d.lhs, MultiIndex::new(1, 1));
        assert_eq!(d.terms[&MultiIndex::new(0, 2)], -&k(0, 1));
        let d = apply_derivative(&e, 1, 0).unwrap();
        assert_eq!(d.lhs, MultiIndex::new(2, 0));
        assert_eq!(d.terms[&MultiIndex::new(2, 1)], k(1, 1));
        assert!(apply_derivative(&e, 0, 0).is_err());
    }

    #[test]
    fn solve_for_zzz() {
        let e = canonical_focusing_eidf(4).unwrap();
        let d = apply_derivative(&e, 0, 1).unwrap();
        let s = solve_for(&d, MultiIndex::new(0, 3)).unwrap();
        assert_eq!(s[&MultiIndex::new(1, 1)], k(0, 2).recip().unwrap());
        assert_eq!(s[&MultiIndex::new(0, 2)], k(0, 1).div(&k(0, 2)).unwrap());
        assert!(!s.contains_key(&MultiIndex::new(0, 3)));
        assert_eq!(solve_for(&d, d.lhs).unwrap(), d.terms);
        assert!(solve_for(&d, MultiIndex::new(0, 1)).is_err());
    }

    #[test]
    fn solved_expression_satisfies_equation() {
        let e = canonical_focusing_eidf(3).unwrap();
        let d = apply_derivative(&e, 1, 0).unwrap();
        let target = MultiIndex::new(1, 2);
        let s = solve_for(&d, target).unwrap();
        // lhs − Σ terms with the target replaced by its expression vanishes
        let c = d.terms[&target].clone();
        let mut residual: Terms = Terms::new();
        residual.insert(d.lhs, RationalCoefficient::one());
        for (k, v) in &d.terms {
            if *k != target {
                residual.insert(*k, -v);
            }
        }
        for (k, v) in &s {
            let slot = residual.entry(*k).or_insert_with(RationalCoefficient::zero);
            *slot = &*slot - &(&c * v);
        }
        assert!(residual.values().all(|v| v.is_zero()));
    }

    #[test]
    fn substitution_examples() {
        let e = canonical_focusing_eidf(4).unwrap();
        let r = DioStep::new(Family::PzI, 0, 1, (1, 1))
            .unwrap()
            .apply(&e)
            .unwrap();
        assert_eq!(fick_coefficient(&r), &k(0, 2) - &(&k(1, 1) * &k(0, 1)));
        let r = DioStep::new(Family::PzI, 0, 1, (0, 3))
            .unwrap()
            .apply(&e)
            .unwrap();
        assert_eq!(
            fick_coefficient(&r),
            &k(0, 2) + &(&k(0, 3) * &k(0, 1)).div(&k(0, 2)).unwrap()
        );
        let r = DioStep::new(Family::PzI, 0, 2, (1, 2))
            .unwrap()
            .apply(&e)
            .unwrap();
        assert_eq!(fick_coefficient(&r), k(0, 2));
        assert!(DioStep::new(Family::PtI, 0, 1, (1, 1)).is_err());
    }

    #[test]
    fn gombosi() {
        let t = gombosi_roundtrip().unwrap();
        let l = RationalCoefficient::symbol("lambda");
        let v = RationalCoefficient::symbol("v");
        let tau = RationalCoefficient::symbol("tau");
        assert_eq!(
            t.after_pzi.coefficient(MultiIndex::new(1, 2)),
            &(&l * &l) * &RationalCoefficient::ratio(-1, 15)
        );
        assert_eq!(
            t.telegraph[&MultiIndex::new(2, 0)],
            &tau * &RationalCoefficient::ratio(-1, 5)
        );
        assert_eq!(
            t.after_pti.coefficient(MultiIndex::new(0, 2)),
            &(&v * &l) * &RationalCoefficient::ratio(1, 3)
        );
    }

    #[test]
    fn step_json() {
        let s: DioStep =
            serde_json::from_str(r#"{"family":"PzI","a":0,"b":1,"target":"1,1"}"#).unwrap();
        assert_eq!(s, DioStep::new(Family::PzI, 0, 1, (1, 1)).unwrap());
    }
}
