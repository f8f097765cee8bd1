//! Displacement-moment equations extracted from an EIDF, their late-time
//! polynomial solution and the displacement-variance coefficient.

use std::collections::BTreeMap;
use std::fmt;

use crate::eidf::{fick_coefficient, Atom, Eidf, MultiIndex, RationalCoefficient};
use crate::error::{Error, Result};

/// A quantity on the right-hand side of a moment equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MomentTerm {
    Constant,
    /// d^m⟨Δz⟩/dt^m
    Mean(u32),
    /// d^m⟨Δz²⟩/dt^m
    MeanSquare(u32),
}

impl fmt::Display for MomentTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |m: u32, x: &str| match m {
            0 => x.to_string(),
            1 => format!("d{x}/dt"),
            _ => format!("d^{m}{x}/dt^{m}"),
        };
        match *self {
            MomentTerm::Constant => f.write_str("1"),
            MomentTerm::Mean(m) => f.write_str(&d(m, "<dz>")),
            MomentTerm::MeanSquare(m) => f.write_str(&d(m, "<dz^2>")),
        }
    }
}

pub type MomentRhs = BTreeMap<MomentTerm, RationalCoefficient>;

/// d⟨Δz⟩/dt = eq1 and d⟨Δz²⟩/dt = eq2.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    pub eq1: MomentRhs,
    pub eq2: MomentRhs,
}

fn accumulate(rhs: &mut MomentRhs, term: MomentTerm, c: RationalCoefficient) {
    // derivatives of a constant vanish
    let slot = rhs.entry(term).or_insert_with(RationalCoefficient::zero);
    *slot = &*slot + &c;
    if slot.is_zero() {
        rhs.remove(&term);
    }
}

/// Multiply the EIDF by Δz and Δz² and integrate over z by parts.
pub fn moment_odes(eidf: &Eidf) -> MomentSystem {
    let mut eq1 = MomentRhs::new();
    let mut eq2 = MomentRhs::new();
    for (&MultiIndex { m, n }, c) in eidf.terms() {
        match n {
            0 => accumulate(&mut eq1, MomentTerm::Mean(m), c.clone()),
            1 if m == 0 => accumulate(&mut eq1, MomentTerm::Constant, -c),
            _ => {}
        }
        match n {
            0 => accumulate(&mut eq2, MomentTerm::MeanSquare(m), c.clone()),
            1 => accumulate(
                &mut eq2,
                MomentTerm::Mean(m),
                c * &RationalCoefficient::integer(-2),
            ),
            2 if m == 0 => accumulate(
                &mut eq2,
                MomentTerm::Constant,
                c * &RationalCoefficient::integer(2),
            ),
            _ => {}
        }
    }
    MomentSystem { eq1, eq2 }
}

/// ⟨Δz⟩ = c1 + a t, ⟨Δz²⟩ = c1p + b t + q t².
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialAnsatz {
    pub a: RationalCoefficient,
    pub b: RationalCoefficient,
    pub q: RationalCoefficient,
    pub c1: RationalCoefficient,
    pub c1p: RationalCoefficient,
}

// Value of a moment term under the ansatz as [t^0, t^1, t^2], each an
// affine form [constant, a, b, q].
type Affine = [RationalCoefficient; 4];

fn zero_affine() -> Affine {
    std::array::from_fn(|_| RationalCoefficient::zero())
}

fn unit(slot: usize, c: RationalCoefficient) -> Affine {
    let mut x = zero_affine();
    x[slot] = c;
    x
}

fn ansatz_value(
    term: MomentTerm,
    c1: &RationalCoefficient,
    c1p: &RationalCoefficient,
) -> [Affine; 3] {
    let one = RationalCoefficient::one;
    let two = || RationalCoefficient::integer(2);
    let mut v = [zero_affine(), zero_affine(), zero_affine()];
    match term {
        MomentTerm::Constant => v[0] = unit(0, one()),
        MomentTerm::Mean(0) => {
            v[0] = unit(0, c1.clone());
            v[1] = unit(1, one());
        }
        MomentTerm::Mean(1) => v[0] = unit(1, one()),
        MomentTerm::Mean(_) => {}
        MomentTerm::MeanSquare(0) => {
            v[0] = unit(0, c1p.clone());
            v[1] = unit(2, one());
            v[2] = unit(3, one());
        }
        MomentTerm::MeanSquare(1) => {
            v[0] = unit(2, one());
            v[1] = unit(3, two());
        }
        MomentTerm::MeanSquare(2) => v[0] = unit(3, two()),
        MomentTerm::MeanSquare(_) => {}
    }
    v
}

/// Rows `lhs − rhs = 0` for each power of t, as affine forms in (a, b, q).
fn residual_rows(
    lhs: MomentTerm,
    rhs: &MomentRhs,
    c1: &RationalCoefficient,
    c1p: &RationalCoefficient,
) -> Vec<Affine> {
    let mut rows = ansatz_value(lhs, c1, c1p).to_vec();
    for (term, c) in rhs {
        let val = ansatz_value(*term, c1, c1p);
        for (row, part) in rows.iter_mut().zip(val.iter()) {
            for (x, y) in row.iter_mut().zip(part.iter()) {
                *x = &*x - &(c * y);
            }
        }
    }
    rows
}

/// Solve the moment system under the late-time polynomial ansatz.
pub fn solve_special(ms: &MomentSystem) -> Result<PolynomialAnsatz> {
    solve_special_with(
        ms,
        &RationalCoefficient::symbol("c1"),
        &RationalCoefficient::symbol("c1p"),
    )
}

/// As `solve_special`, with explicit initial constants.
pub fn solve_special_with(
    ms: &MomentSystem,
    c1: &RationalCoefficient,
    c1p: &RationalCoefficient,
) -> Result<PolynomialAnsatz> {
    let mut rows = residual_rows(MomentTerm::Mean(1), &ms.eq1, c1, c1p);
    rows.extend(residual_rows(MomentTerm::MeanSquare(1), &ms.eq2, c1, c1p));

    // Gauss-Jordan on columns a, b, q; column 0 holds the constant part.
    let mut pivot_rows = Vec::new();
    for col in 1..4 {
        let Some(p) = (0..rows.len())
            .filter(|r| !pivot_rows.contains(r))
            .find(|&r| !rows[r][col].is_zero())
        else {
            return Err(Error::Model(format!(
                "moment system does not determine {}",
                ["", "a", "b", "q"][col]
            )));
        };
        let inv = rows[p][col].recip()?;
        let prow: Affine = std::array::from_fn(|k| &rows[p][k] * &inv);
        for (r, row) in rows.iter_mut().enumerate() {
            if r == p || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for k in 0..4 {
                row[k] = &row[k] - &(&f * &prow[k]);
            }
        }
        rows[p] = prow;
        pivot_rows.push(p);
    }
    for (r, row) in rows.iter().enumerate() {
        if !pivot_rows.contains(&r) && !row[0].is_zero() {
            return Err(Error::Model(format!(
                "inconsistent moment equations: {} = 0",
                row[0]
            )));
        }
    }
    // pivot row for column k reads x_k + constant = 0
    let value = |k: usize| -&rows[pivot_rows[k - 1]][0];
    let (a, b, q) = (value(1), value(2), value(3));
    if q != &a * &a {
        return Err(Error::Model(format!(
            "q = {q} differs from a^2 = {}",
            &a * &a
        )));
    }
    Ok(PolynomialAnsatz {
        a,
        b,
        q,
        c1: c1.clone(),
        c1p: c1p.clone(),
    })
}

impl PolynomialAnsatz {
    /// (1/2) dσ²/dt with σ² = ⟨Δz²⟩ − ⟨Δz⟩².
    pub fn kappa_dv(&self) -> RationalCoefficient {
        &(&self.b * &RationalCoefficient::ratio(1, 2)) - &(&self.a * &self.c1)
    }
}

/// Displacement-variance coefficient of an EIDF; checked to be independent
/// of the initial constants.
pub fn kappa_dv_symbolic(eidf: &Eidf) -> Result<RationalCoefficient> {
    let ms = moment_odes(eidf);
    let dv = solve_special(&ms)?.kappa_dv();
    let fresh = solve_special_with(
        &ms,
        &RationalCoefficient::symbol("c1_alt"),
        &RationalCoefficient::symbol("c1p_alt"),
    )?
    .kappa_dv();
    if dv != fresh {
        return Err(Error::Model(format!(
            "displacement variance depends on initial constants: {dv} vs {fresh}"
        )));
    }
    let stray: Vec<Atom> = dv
        .atoms()
        .into_iter()
        .filter(|a| a.kappa_index().is_none() && matches!(a.name().as_str(), "c1" | "c1p"))
        .collect();
    if !stray.is_empty() {
        return Err(Error::Model(format!(
            "displacement variance retains {stray:?}"
        )));
    }
    Ok(dv)
}

/// Fick and displacement-variance coefficients before and after a script.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptReport {
    pub name: String,
    pub fick: RationalCoefficient,
    pub dv: RationalCoefficient,
    pub fick_changed: bool,
    pub dv_invariant: bool,
}

pub fn compare(name: &str, before: &Eidf, after: &Eidf) -> Result<ScriptReport> {
    let fick = fick_coefficient(after);
    let dv = kappa_dv_symbolic(after)?;
    Ok(ScriptReport {
        name: name.to_string(),
        fick_changed: fick != fick_coefficient(before),
        dv_invariant: dv == kappa_dv_symbolic(before)?,
        fick,
        dv,
    })
}

impl fmt::Display for MomentSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |f: &mut fmt::Formatter<'_>, rhs: &MomentRhs| -> fmt::Result {
            if rhs.is_empty() {
                return f.write_str(" 0");
            }
            for (i, (t, c)) in rhs.iter().enumerate() {
                let sep = if i == 0 { " " } else { " + " };
                write!(f, "{sep}({c})*{t}")?;
            }
            Ok(())
        };
        f.write_str("d<dz>/dt =")?;
        side(f, &self.eq1)?;
        f.write_str("\nd<dz^2>/dt =")?;
        side(f, &self.eq2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eidf::{canonical_focusing_eidf, DioStep, Family};

    fn k(m: u32, n: u32) -> RationalCoefficient {
        RationalCoefficient::kappa(m, n)
    }

    fn dv0() -> RationalCoefficient {
        &k(0, 2) - &(&k(0, 1) * &k(1, 1))
    }

    #[test]
    fn canonical_moments() {
        let e = canonical_focusing_eidf(4).unwrap();
        let ms = moment_odes(&e);
        assert_eq!(ms.eq1.len(), 1);
        assert_eq!(ms.eq1[&MomentTerm::Constant], k(0, 1));
        assert_eq!(
            ms.eq2[&MomentTerm::Mean(0)],
            &k(0, 1) * &RationalCoefficient::integer(2)
        );
        assert_eq!(
            ms.eq2[&MomentTerm::Constant],
            &k(0, 2) * &RationalCoefficient::integer(2)
        );
        assert_eq!(
            ms.eq2[&MomentTerm::Mean(1)],
            &k(1, 1) * &RationalCoefficient::integer(-2)
        );
        let s = solve_special(&ms).unwrap();
        assert_eq!(s.a, k(0, 1));
        assert_eq!(s.q, &k(0, 1) * &k(0, 1));
        assert_eq!(kappa_dv_symbolic(&e).unwrap(), dv0());
    }

    #[test]
    fn after_first_pti() {
        let e = canonical_focusing_eidf(4).unwrap();
        let r = DioStep::new(Family::PtI, 1, 0, (1, 1))
            .unwrap()
            .apply(&e)
            .unwrap();
        let ms = moment_odes(&r);
        assert_eq!(
            ms.eq1[&MomentTerm::Mean(2)],
            -&k(1, 1).div(&k(0, 1)).unwrap()
        );
        assert_eq!(kappa_dv_symbolic(&r).unwrap(), dv0());
    }

    #[test]
    fn examples_from_first_pzi() {
        let e = canonical_focusing_eidf(4).unwrap();
        for t in [(1, 1), (0, 3)] {
            let r = DioStep::new(Family::PzI, 0, 1, t)
                .unwrap()
                .apply(&e)
                .unwrap();
            let s = solve_special(&moment_odes(&r)).unwrap();
            assert_eq!(s.a, k(0, 1));
            assert_eq!(kappa_dv_symbolic(&r).unwrap(), dv0());
        }
        let r = DioStep::new(Family::PtI, 2, 0, (2, 1))
            .unwrap()
            .apply(&e)
            .unwrap();
        let s = solve_special(&moment_odes(&r)).unwrap();
        assert_eq!(s.a, k(0, 1));
        assert_eq!(s.q, &k(0, 1) * &k(0, 1));
    }

    #[test]
    fn malformed_system_is_rejected() {
        // ⟨Δz²⟩ growing without a matching drift
        let mut ms = moment_odes(&canonical_focusing_eidf(2).unwrap());
        ms.eq2
            .insert(MomentTerm::Mean(0), RationalCoefficient::integer(7));
        assert!(matches!(solve_special(&ms), Err(Error::Model(_))));
    }

    #[test]
    fn linear_in_coefficients() {
        let e = canonical_focusing_eidf(3).unwrap();
        let c = RationalCoefficient::ratio(3, 7);
        let a = moment_odes(&e);
        let b = moment_odes(&e.scaled(&c));
        for (t, v) in &a.eq2 {
            assert_eq!(&(v * &c), &b.eq2[t]);
        }
        for (t, v) in &a.eq1 {
            assert_eq!(&(v * &c), &b.eq1[t]);
        }
    }
}
