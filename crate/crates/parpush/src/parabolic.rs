//! Parabolic bundles as weighted-flag data, and residue data of logarithmic
//! connections.
//!
//! Flags are stored by graded dimensions and weights only: every quantity
//! computed here (degrees, direct images, residues, reconstructions) depends
//! on the filtration solely through `dim F_j / F_{j+1}` and the weight
//! attached to that quotient, so no basis of the fiber is ever chosen.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// One graded piece of a weighted flag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlagStep {
    pub dim: usize,
    pub weight: Rational,
}

/// A weighted flag on a fiber: strictly increasing weights in `[0, 1)`,
/// positive graded dimensions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WeightedFlag {
    steps: Vec<FlagStep>,
}

impl WeightedFlag {
    pub fn new(steps: Vec<FlagStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Parse("flag must have at least one step".into()));
        }
        for step in &steps {
            if step.dim == 0 {
                return Err(Error::Parse("flag step dimension must be positive".into()));
            }
        }
        if steps[0].weight < Rational::zero() || steps.last().unwrap().weight >= Rational::one() {
            return Err(Error::OutOfRange(format!(
                "flag weights must lie in [0, 1): {}",
                WeightedFlag { steps: steps.clone() }
            )));
        }
        for pair in steps.windows(2) {
            if pair[0].weight >= pair[1].weight {
                return Err(Error::Parse(format!(
                    "flag weights must be strictly increasing: {} then {}",
                    pair[0].weight, pair[1].weight
                )));
            }
        }
        Ok(WeightedFlag { steps })
    }

    /// The flag carried implicitly by an unflagged point: one step, weight 0.
    pub fn trivial(rank: usize) -> Self {
        WeightedFlag { steps: vec![FlagStep { dim: rank, weight: Rational::zero() }] }
    }

    pub fn is_trivial(&self) -> bool {
        self.steps.len() == 1 && self.steps[0].weight.is_zero()
    }

    pub fn steps(&self) -> &[FlagStep] {
        &self.steps
    }

    pub fn rank(&self) -> usize {
        self.steps.iter().map(|s| s.dim).sum()
    }

    /// Weighted contribution to the parabolic degree: `sum(weight * dim)`.
    pub fn weight_mass(&self) -> Rational {
        self.steps.iter().map(|s| s.weight.scale(s.dim as i64)).sum()
    }

    /// Dimension of the weighted subspace `E^c`: the flag subspace attached
    /// to the smallest weight `>= c`, or 0 past the last weight.
    pub fn weighted_subspace_dim(&self, c: &Rational) -> Result<usize> {
        if c < &Rational::zero() || c > &Rational::one() {
            return Err(Error::OutOfRange(format!("c = {c} outside [0, 1]")));
        }
        let j = self.steps.iter().position(|s| &s.weight >= c).unwrap_or(self.steps.len());
        Ok(self.steps[j..].iter().map(|s| s.dim).sum())
    }
}

impl fmt::Display for WeightedFlag {
    /// `dims@weights` form, e.g. `1@0/1 + 2@1/2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.steps.iter().map(|s| format!("{}@{}", s.dim, s.weight)).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Rank and degree of the underlying bundle on one component of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleComponent {
    pub rank: usize,
    pub degree: i64,
}

/// A weighted flag placed at a labelled point of one component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedPoint {
    pub label: String,
    pub component: usize,
    pub flag: WeightedFlag,
}

/// A parabolic bundle: per-component rank and degree, plus weighted flags at
/// finitely many labelled points. Points without an entry carry the trivial
/// flag. On a connected curve there is exactly one component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParabolicBundle {
    components: Vec<BundleComponent>,
    flags: Vec<FlaggedPoint>,
}

impl ParabolicBundle {
    pub fn new(components: Vec<BundleComponent>, mut flags: Vec<FlaggedPoint>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Parse("bundle needs at least one component".into()));
        }
        if components.iter().any(|c| c.rank == 0) {
            return Err(Error::Parse("component rank must be positive".into()));
        }
        flags.sort_by(|a, b| a.label.cmp(&b.label));
        for pair in flags.windows(2) {
            if pair[0].label == pair[1].label {
                return Err(Error::Parse(format!("duplicate flag at {:?}", pair[0].label)));
            }
        }
        for fp in &flags {
            let comp = components
                .get(fp.component)
                .ok_or_else(|| Error::RankMismatch(format!(
                    "flag at {:?} references component {}",
                    fp.label, fp.component
                )))?;
            if fp.flag.rank() != comp.rank {
                return Err(Error::RankMismatch(format!(
                    "flag at {:?} has rank {} but the component has rank {}",
                    fp.label,
                    fp.flag.rank(),
                    comp.rank
                )));
            }
        }
        Ok(ParabolicBundle { components, flags })
    }

    /// Single-component constructor for bundles on a connected curve.
    pub fn on_connected(rank: usize, degree: i64, flags: Vec<(String, WeightedFlag)>) -> Result<Self> {
        Self::new(
            vec![BundleComponent { rank, degree }],
            flags
                .into_iter()
                .map(|(label, flag)| FlaggedPoint { label, component: 0, flag })
                .collect(),
        )
    }

    pub fn components(&self) -> &[BundleComponent] {
        &self.components
    }

    pub fn flags(&self) -> &[FlaggedPoint] {
        &self.flags
    }

    pub fn flag_at(&self, label: &str) -> Option<&FlaggedPoint> {
        self.flags.iter().find(|f| f.label == label)
    }

    /// The flag at `label` on `component`, trivial if absent.
    pub fn effective_flag(&self, label: &str, component: usize) -> WeightedFlag {
        match self.flag_at(label) {
            Some(fp) => fp.flag.clone(),
            None => WeightedFlag::trivial(self.components[component].rank),
        }
    }

    pub fn total_degree(&self) -> i64 {
        self.components.iter().map(|c| c.degree).sum()
    }

    pub fn total_rank(&self) -> usize {
        self.components.iter().map(|c| c.rank).sum()
    }

    /// Parabolic degree: underlying degree plus the weighted sum of graded
    /// flag dimensions, over all components.
    pub fn par_deg(&self) -> Rational {
        let weights: Rational = self.flags.iter().map(|f| f.flag.weight_mass()).sum();
        Rational::int(self.total_degree()) + weights
    }

    /// Degree of the sheaf of flag-preserving endomorphisms: `0` minus, for
    /// every flagged point, the codimension of the block-triangular
    /// endomorphisms in the full fiber endomorphisms.
    pub fn flag_end_degree(&self) -> i64 {
        let mut codim = 0i64;
        for fp in &self.flags {
            let dims: Vec<i64> = fp.flag.steps().iter().map(|s| s.dim as i64).collect();
            for a in 0..dims.len() {
                for b in (a + 1)..dims.len() {
                    codim += dims[a] * dims[b];
                }
            }
        }
        -codim
    }

    /// Same data with trivial flag entries dropped.
    pub fn normalized(&self) -> ParabolicBundle {
        ParabolicBundle {
            components: self.components.clone(),
            flags: self.flags.iter().filter(|f| !f.flag.is_trivial()).cloned().collect(),
        }
    }

    /// Data equality up to trivial flag entries.
    pub fn equivalent(&self, other: &ParabolicBundle) -> bool {
        self.normalized() == other.normalized()
    }
}

/// Residue eigenvalues of a logarithmic connection, one scalar per graded
/// flag step at each point that carries a nonzero residue. Points without an
/// entry have residue zero; an entry at an unflagged point acts on the whole
/// fiber (trivial flag).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueEntry {
    pub label: String,
    pub component: usize,
    pub eigenvalues: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResidueData {
    entries: Vec<ResidueEntry>,
}

impl ResidueData {
    pub fn new(mut entries: Vec<ResidueEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.label.cmp(&b.label));
        for pair in entries.windows(2) {
            if pair[0].label == pair[1].label {
                return Err(Error::Parse(format!("duplicate residue entry at {:?}", pair[0].label)));
            }
        }
        if entries.iter().any(|e| e.eigenvalues.is_empty()) {
            return Err(Error::Parse("residue entry needs at least one eigenvalue".into()));
        }
        Ok(ResidueData { entries })
    }

    pub fn empty() -> Self {
        ResidueData { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[ResidueEntry] {
        &self.entries
    }

    pub fn entry_at(&self, label: &str) -> Option<&ResidueEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Checks that every entry matches the shape of the bundle's flag at its
    /// point: one eigenvalue per flag step, or a single eigenvalue at an
    /// unflagged point, on a valid component.
    pub fn check_alignment(&self, bundle: &ParabolicBundle) -> Result<()> {
        for entry in &self.entries {
            if entry.component >= bundle.components().len() {
                return Err(Error::MisalignedResidues(format!(
                    "entry at {:?} references component {}",
                    entry.label, entry.component
                )));
            }
            match bundle.flag_at(&entry.label) {
                Some(fp) => {
                    if fp.component != entry.component {
                        return Err(Error::MisalignedResidues(format!(
                            "entry at {:?} is on component {} but the flag is on component {}",
                            entry.label, entry.component, fp.component
                        )));
                    }
                    if fp.flag.steps().len() != entry.eigenvalues.len() {
                        return Err(Error::MisalignedResidues(format!(
                            "entry at {:?} has {} eigenvalues for {} flag steps",
                            entry.label,
                            entry.eigenvalues.len(),
                            fp.flag.steps().len()
                        )));
                    }
                }
                None => {
                    if entry.eigenvalues.len() != 1 {
                        return Err(Error::MisalignedResidues(format!(
                            "entry at unflagged point {:?} must have a single eigenvalue",
                            entry.label
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Eigenvalues at a point, aligned with the flag steps there (all zero
    /// when the point has no entry).
    pub fn eigenvalues_for(&self, bundle: &ParabolicBundle, label: &str, component: usize) -> Vec<Rational> {
        let steps = match bundle.flag_at(label) {
            Some(fp) => fp.flag.steps().len(),
            None => 1,
        };
        let _ = component;
        match self.entry_at(label) {
            Some(e) => e.eigenvalues.clone(),
            None => vec![Rational::zero(); steps],
        }
    }

    /// Data equality up to entries that are identically zero.
    pub fn equivalent(&self, other: &ResidueData) -> bool {
        let essential = |r: &ResidueData| -> Vec<ResidueEntry> {
            r.entries
                .iter()
                .filter(|e| e.eigenvalues.iter().any(|v| !v.is_zero()))
                .cloned()
                .collect()
        };
        essential(self) == essential(other)
    }
}

/// The trace identity for logarithmic connections: on every component the
/// degree of the underlying bundle equals minus the sum of residue traces.
pub fn ohtsuki_check(bundle: &ParabolicBundle, residues: &ResidueData) -> Result<bool> {
    residues.check_alignment(bundle)?;
    let mut trace_sums = vec![Rational::zero(); bundle.components().len()];
    for entry in residues.entries() {
        let dims: Vec<usize> = match bundle.flag_at(&entry.label) {
            Some(fp) => fp.flag.steps().iter().map(|s| s.dim).collect(),
            None => vec![bundle.components()[entry.component].rank],
        };
        let trace: Rational = entry
            .eigenvalues
            .iter()
            .zip(&dims)
            .map(|(ev, &d)| ev.scale(d as i64))
            .sum();
        trace_sums[entry.component] = trace_sums[entry.component].clone() + trace;
    }
    Ok(bundle
        .components()
        .iter()
        .zip(&trace_sums)
        .all(|(comp, trace)| Rational::int(comp.degree) == -trace))
}

/// Whether the residue data makes the connection parabolic: at every flagged
/// point the residue acts on each graded piece as its weight, and residues at
/// unflagged points vanish.
pub fn is_parabolic_connection(bundle: &ParabolicBundle, residues: &ResidueData) -> Result<bool> {
    residues.check_alignment(bundle)?;
    for fp in bundle.flags() {
        let eigen = residues.eigenvalues_for(bundle, &fp.label, fp.component);
        let weights: Vec<Rational> = fp.flag.steps().iter().map(|s| s.weight.clone()).collect();
        if eigen != weights {
            return Ok(false);
        }
    }
    for entry in residues.entries() {
        if bundle.flag_at(&entry.label).is_none() && entry.eigenvalues.iter().any(|v| !v.is_zero())
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The canonical parabolic residue data: eigenvalue = weight at every flagged
/// point. Useful both in tests and as the round-trip seed.
pub fn parabolic_residues(bundle: &ParabolicBundle) -> ResidueData {
    ResidueData::new(
        bundle
            .flags()
            .iter()
            .filter(|fp| !fp.flag.steps().iter().all(|s| s.weight.is_zero()))
            .map(|fp| ResidueEntry {
                label: fp.label.clone(),
                component: fp.component,
                eigenvalues: fp.flag.steps().iter().map(|s| s.weight.clone()).collect(),
            })
            .collect(),
    )
    .expect("flag labels are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flag(steps: &[(usize, (i64, i64))]) -> WeightedFlag {
        WeightedFlag::new(
            steps
                .iter()
                .map(|&(dim, (p, q))| FlagStep { dim, weight: Rational::of(p, q) })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn flag_validation() {
        assert!(WeightedFlag::new(vec![]).is_err());
        // weights must increase strictly
        assert!(WeightedFlag::new(vec![
            FlagStep { dim: 1, weight: Rational::of(1, 2) },
            FlagStep { dim: 1, weight: Rational::of(1, 2) },
        ])
        .is_err());
        // last weight must stay below 1
        assert!(WeightedFlag::new(vec![FlagStep { dim: 1, weight: Rational::one() }]).is_err());
        // negative weights rejected
        assert!(WeightedFlag::new(vec![FlagStep { dim: 1, weight: Rational::of(-1, 2) }]).is_err());
    }

    #[test]
    fn par_deg_examples() {
        let e = ParabolicBundle::on_connected(1, 0, vec![]).unwrap();
        assert_eq!(e.par_deg(), Rational::zero());

        let e = ParabolicBundle::on_connected(
            3,
            0,
            vec![("x".into(), flag(&[(2, (1, 3)), (1, (1, 2))]))],
        )
        .unwrap();
        assert_eq!(e.par_deg(), Rational::of(7, 6));

        let half = flag(&[(1, (0, 1)), (1, (1, 2))]);
        let e = ParabolicBundle::on_connected(
            2,
            -1,
            vec![("z0".into(), half.clone()), ("zinf".into(), half)],
        )
        .unwrap();
        assert_eq!(e.par_deg(), Rational::zero());
    }

    #[test]
    fn weighted_subspace_examples() {
        let f = flag(&[(2, (0, 1)), (1, (1, 2))]);
        assert_eq!(f.weighted_subspace_dim(&Rational::zero()).unwrap(), 3);
        assert_eq!(f.weighted_subspace_dim(&Rational::of(1, 4)).unwrap(), 1);
        assert_eq!(f.weighted_subspace_dim(&Rational::one()).unwrap(), 0);
        assert!(f.weighted_subspace_dim(&Rational::of(3, 2)).is_err());
        assert!(f.weighted_subspace_dim(&Rational::of(-1, 2)).is_err());
    }

    #[test]
    fn weighted_subspace_recovers_flag() {
        // the flag can be read back off c -> dim E^c: steps sit where the
        // dimension drops as c passes a weight
        let f = flag(&[(1, (0, 1)), (2, (1, 3)), (1, (3, 4))]);
        let mut recovered = Vec::new();
        let mut prev_dim = f.rank();
        for step in f.steps() {
            let just_above = &step.weight + &Rational::of(1, 1000);
            let dim_after = f.weighted_subspace_dim(&just_above).unwrap();
            recovered.push(FlagStep { dim: prev_dim - dim_after, weight: step.weight.clone() });
            prev_dim = dim_after;
        }
        assert_eq!(recovered, f.steps());
    }

    #[test]
    fn flag_end_degree_examples() {
        let e = ParabolicBundle::on_connected(3, 5, vec![]).unwrap();
        assert_eq!(e.flag_end_degree(), 0);

        let e = ParabolicBundle::on_connected(
            3,
            0,
            vec![("x".into(), flag(&[(2, (0, 1)), (1, (1, 2))]))],
        )
        .unwrap();
        assert_eq!(e.flag_end_degree(), -2);

        let f = flag(&[(1, (0, 1)), (1, (1, 2))]);
        let e = ParabolicBundle::on_connected(
            2,
            0,
            vec![("x".into(), f.clone()), ("y".into(), f)],
        )
        .unwrap();
        assert_eq!(e.flag_end_degree(), -2);
    }

    #[test]
    fn ohtsuki_examples() {
        let e = ParabolicBundle::on_connected(1, 0, vec![]).unwrap();
        assert!(ohtsuki_check(&e, &ResidueData::empty()).unwrap());

        let f = flag(&[(1, (0, 1)), (1, (1, 2))]);
        let e = ParabolicBundle::on_connected(
            2,
            -1,
            vec![("z0".into(), f.clone()), ("zinf".into(), f)],
        )
        .unwrap();
        let r = parabolic_residues(&e);
        assert!(ohtsuki_check(&e, &r).unwrap());

        let e = ParabolicBundle::on_connected(1, 0, vec![("x".into(), flag(&[(1, (1, 3))]))])
            .unwrap();
        let r = parabolic_residues(&e);
        assert!(!ohtsuki_check(&e, &r).unwrap());
    }

    #[test]
    fn misaligned_residues_rejected() {
        let e = ParabolicBundle::on_connected(2, 0, vec![("x".into(), flag(&[(2, (1, 2))]))])
            .unwrap();
        let r = ResidueData::new(vec![ResidueEntry {
            label: "x".into(),
            component: 0,
            eigenvalues: vec![Rational::zero(), Rational::zero()],
        }])
        .unwrap();
        assert!(matches!(ohtsuki_check(&e, &r), Err(Error::MisalignedResidues(_))));
    }

    #[test]
    fn parabolic_connection_examples() {
        let f = flag(&[(1, (0, 1)), (1, (1, 2))]);
        let e = ParabolicBundle::on_connected(2, -1, vec![("x".into(), f)]).unwrap();
        let good = ResidueData::new(vec![ResidueEntry {
            label: "x".into(),
            component: 0,
            eigenvalues: vec![Rational::zero(), Rational::of(1, 2)],
        }])
        .unwrap();
        assert!(is_parabolic_connection(&e, &good).unwrap());

        let bad = ResidueData::new(vec![ResidueEntry {
            label: "x".into(),
            component: 0,
            eigenvalues: vec![Rational::zero(), Rational::of(3, 2)],
        }])
        .unwrap();
        assert!(!is_parabolic_connection(&e, &bad).unwrap());

        // a trivial flag with zero residue is a regular point
        let e = ParabolicBundle::on_connected(1, 0, vec![]).unwrap();
        let r = ResidueData::new(vec![ResidueEntry {
            label: "x".into(),
            component: 0,
            eigenvalues: vec![Rational::zero()],
        }])
        .unwrap();
        assert!(is_parabolic_connection(&e, &r).unwrap());
    }

    #[test]
    fn connection_forces_par_deg_zero() {
        let f = flag(&[(1, (0, 1)), (1, (1, 2))]);
        let e = ParabolicBundle::on_connected(
            2,
            -1,
            vec![("z0".into(), f.clone()), ("zinf".into(), f)],
        )
        .unwrap();
        let r = parabolic_residues(&e);
        assert!(is_parabolic_connection(&e, &r).unwrap());
        assert_eq!(ohtsuki_check(&e, &r).unwrap(), e.par_deg().is_zero());
    }

    proptest! {
        /// for parabolic residue data, the trace identity holds exactly when
        /// the parabolic degree vanishes
        #[test]
        fn ohtsuki_iff_par_deg_zero(degree in -4i64..4, num in 0i64..4, den in 1i64..5) {
            let num = num.min(den - 1).max(0);
            let steps = if num == 0 {
                vec![FlagStep { dim: 2, weight: Rational::zero() }]
            } else {
                vec![
                    FlagStep { dim: 1, weight: Rational::zero() },
                    FlagStep { dim: 1, weight: Rational::of(num, den) },
                ]
            };
            let e = ParabolicBundle::on_connected(
                2, degree, vec![("x".into(), WeightedFlag::new(steps).unwrap())],
            ).unwrap();
            let r = parabolic_residues(&e);
            prop_assert!(is_parabolic_connection(&e, &r).unwrap());
            prop_assert_eq!(ohtsuki_check(&e, &r).unwrap(), e.par_deg().is_zero());
        }

        /// dim E^c is non-increasing in c
        #[test]
        fn weighted_subspace_monotone(p1 in 0i64..12, p2 in 0i64..12) {
            let f = flag(&[(1, (0, 1)), (2, (1, 3)), (1, (3, 4))]);
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let a = f.weighted_subspace_dim(&Rational::of(lo, 12)).unwrap();
            let b = f.weighted_subspace_dim(&Rational::of(hi, 12)).unwrap();
            prop_assert!(a >= b);
        }
    }
}
