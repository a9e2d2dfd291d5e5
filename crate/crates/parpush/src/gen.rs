//! Deterministic random instances for the property sweeps: valid coverings
//! (the last branch permutation is solved from the surface-group relation),
//! bundles upstairs with flags at desk scale, and residue data of the
//! several kinds the checks need.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::hurwitz::{CoveringMonodromy, MarkedCurve, Permutation, YPoint};
use crate::parabolic::{
    parabolic_residues, BundleComponent, FlagStep, FlaggedPoint, ParabolicBundle, ResidueData,
    ResidueEntry, WeightedFlag,
};
use crate::pushforward::UpstairsBundle;
use crate::rational::Rational;

#[derive(Debug, Clone)]
pub struct InstanceConfig {
    pub max_genus: usize,
    pub max_marked: usize,
    pub max_degree: usize,
    pub max_rank: usize,
    pub max_weight_denom: i64,
    pub max_abs_degree: i64,
    /// Pin per-component degrees of disconnected covers to the same
    /// canonical split that `reconstruct` uses. The split is invisible in
    /// the direct-image data, so round-trip grids must agree on it.
    pub canonical_degree_split: bool,
}

impl InstanceConfig {
    pub fn pushforward_grid() -> Self {
        InstanceConfig {
            max_genus: 2,
            max_marked: 3,
            max_degree: 4,
            max_rank: 3,
            max_weight_denom: 4,
            max_abs_degree: 3,
            canonical_degree_split: false,
        }
    }

    pub fn roundtrip_grid() -> Self {
        InstanceConfig {
            max_genus: 1,
            max_marked: 3,
            max_degree: 5,
            max_rank: 3,
            max_weight_denom: 6,
            max_abs_degree: 3,
            canonical_degree_split: true,
        }
    }
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Permutation {
    let mut images: Vec<usize> = (0..n).collect();
    images.shuffle(rng);
    Permutation::from_images(images).expect("shuffled identity")
}

/// A covering satisfying the surface-group relation: all permutations are
/// free except the branch permutation of the last marked point, which is
/// solved from the relation.
pub fn random_covering(rng: &mut impl Rng, cfg: &InstanceConfig) -> CoveringMonodromy {
    let genus = rng.gen_range(0..=cfg.max_genus);
    let marked = rng.gen_range(1..=cfg.max_marked.max(1));
    let labels: Vec<String> = (0..marked).map(|i| format!("x{i}")).collect();
    let base = MarkedCurve::new(genus, labels.clone()).expect("generated labels are distinct");
    let degree = rng.gen_range(1..=cfg.max_degree.max(1));

    let handles: Vec<Permutation> =
        (0..2 * genus).map(|_| random_permutation(rng, degree)).collect();
    let mut branch = BTreeMap::new();
    for label in labels.iter().take(marked - 1) {
        branch.insert(label.clone(), random_permutation(rng, degree));
    }
    // solve the relation for the last branch permutation
    let partial = CoveringMonodromy::new(base.clone(), degree, handles.clone(), branch.clone())
        .expect("well-formed by construction");
    let product = partial.relation_product();
    branch.insert(labels[marked - 1].clone(), product.inverse());
    let covering = CoveringMonodromy::new(base, degree, handles, branch)
        .expect("well-formed by construction");
    debug_assert!(covering.validate().is_valid());
    covering
}

/// All reduced weights `p/q` with `q <= max_denom`, ascending in `[0, 1)`.
pub fn weight_palette(max_denom: i64) -> Vec<Rational> {
    let mut palette = vec![Rational::zero()];
    for q in 2..=max_denom.max(1) {
        for p in 1..q {
            let w = Rational::of(p, q);
            if !palette.contains(&w) {
                palette.push(w);
            }
        }
    }
    palette.sort();
    palette
}

/// A random flag of the given rank: a partition into at most `rank` steps
/// with distinct increasing weights from the palette.
pub fn random_flag(rng: &mut impl Rng, rank: usize, max_denom: i64) -> WeightedFlag {
    let palette = weight_palette(max_denom);
    let steps = rng.gen_range(1..=rank.min(palette.len()));
    let mut dims = vec![1usize; steps];
    for _ in 0..(rank - steps) {
        dims[rng.gen_range(0..steps)] += 1;
    }
    let mut indices: Vec<usize> = (0..palette.len()).collect();
    indices.shuffle(rng);
    let mut chosen: Vec<Rational> = indices[..steps].iter().map(|&i| palette[i].clone()).collect();
    chosen.sort();
    WeightedFlag::new(
        dims.into_iter()
            .zip(chosen)
            .map(|(dim, weight)| FlagStep { dim, weight })
            .collect(),
    )
    .expect("distinct ascending weights in [0,1)")
}

/// A flag whose weighted mass `sum(dim * weight)` is an integer, built from
/// pairs `(lambda, 1 - lambda)` of equal dimension plus weight-0 padding.
/// Used to make instances of parabolic degree zero.
pub fn balanced_flag(rng: &mut impl Rng, rank: usize, max_denom: i64) -> WeightedFlag {
    if rank < 2 || rng.gen_bool(0.2) {
        return WeightedFlag::trivial(rank);
    }
    let palette: Vec<Rational> = weight_palette(max_denom)
        .into_iter()
        .filter(|w| !w.is_zero() && *w < Rational::of(1, 2))
        .collect();
    if palette.is_empty() {
        return WeightedFlag::trivial(rank);
    }
    let lambda = palette[rng.gen_range(0..palette.len())].clone();
    let pair_dim = rng.gen_range(1..=rank / 2);
    let rest = rank - 2 * pair_dim;
    let mut steps = Vec::new();
    if rest > 0 {
        steps.push(FlagStep { dim: rest, weight: Rational::zero() });
    }
    steps.push(FlagStep { dim: pair_dim, weight: lambda.clone() });
    steps.push(FlagStep { dim: pair_dim, weight: Rational::one() - lambda });
    WeightedFlag::new(steps).expect("0 < lambda < 1 - lambda < 1")
}

/// The canonical fiber points of the covering over every marked point.
pub fn fiber_labels(covering: &CoveringMonodromy) -> Vec<(YPoint, usize, usize)> {
    let components = covering.components().expect("valid covering");
    let mut out = Vec::new();
    for label in covering.base().marked_points() {
        for cycle in covering.ramification_profile(label).expect("marked point") {
            let sheet = cycle.sheets[0];
            let component = components
                .iter()
                .position(|c| c.contains(sheet))
                .expect("sheet below degree");
            out.push((
                YPoint { component, base: label.clone(), sheet },
                component,
                cycle.multiplicity,
            ));
        }
    }
    out
}

/// A random bundle upstairs over a random covering. `balanced` makes every
/// component have parabolic degree zero.
pub fn random_upstairs(rng: &mut impl Rng, cfg: &InstanceConfig, balanced: bool) -> UpstairsBundle {
    let covering = random_covering(rng, cfg);
    let components = covering.components().expect("valid covering");
    let ranks: Vec<usize> =
        components.iter().map(|_| rng.gen_range(1..=cfg.max_rank)).collect();

    let mut flags: Vec<FlaggedPoint> = Vec::new();
    for (point, component, _) in fiber_labels(&covering) {
        if rng.gen_bool(0.5) {
            let flag = if balanced {
                balanced_flag(rng, ranks[component], cfg.max_weight_denom)
            } else {
                random_flag(rng, ranks[component], cfg.max_weight_denom)
            };
            if !flag.is_trivial() {
                flags.push(FlaggedPoint { label: point.label(), component, flag });
            }
        }
    }

    let mut degrees: Vec<i64> = if balanced {
        // degree = -mass makes the parabolic degree vanish per component
        let mut mass = vec![Rational::zero(); components.len()];
        for fp in &flags {
            mass[fp.component] = mass[fp.component].clone() + fp.flag.weight_mass();
        }
        mass.iter()
            .map(|m| {
                debug_assert!(m.is_integer());
                let neg = -m;
                neg.numer().try_into().expect("desk-scale degree")
            })
            .collect()
    } else {
        components
            .iter()
            .map(|_| rng.gen_range(-cfg.max_abs_degree..=cfg.max_abs_degree))
            .collect()
    };

    if cfg.canonical_degree_split && components.len() > 1 && !balanced {
        // match the canonical split used by the reconstruction
        let chi_total: i64 = components
            .iter()
            .zip(&ranks)
            .zip(&degrees)
            .map(|((comp, &r), &d)| d + r as i64 * (1 - comp.genus as i64))
            .sum();
        let k = components.len() as i64;
        let q = chi_total.div_euclid(k);
        let rem = chi_total.rem_euclid(k);
        degrees = components
            .iter()
            .zip(&ranks)
            .enumerate()
            .map(|(i, (comp, &r))| {
                let chi = q + if (i as i64) < rem { 1 } else { 0 };
                chi - r as i64 * (1 - comp.genus as i64)
            })
            .collect();
    }

    let bundle = ParabolicBundle::new(
        ranks
            .iter()
            .zip(&degrees)
            .map(|(&rank, &degree)| BundleComponent { rank, degree })
            .collect(),
        flags,
    )
    .expect("flags match component ranks");
    UpstairsBundle::new(covering, bundle).expect("generated data is valid")
}

/// A random instance carrying its canonical parabolic residue data.
pub fn random_parabolic_instance(
    rng: &mut impl Rng,
    cfg: &InstanceConfig,
    balanced: bool,
) -> (UpstairsBundle, ResidueData) {
    let u = random_upstairs(rng, cfg, balanced);
    let residues = parabolic_residues(u.bundle());
    (u, residues)
}

/// Residue data with arbitrary (non-parabolic) eigenvalues adjusted so the
/// trace identity holds on every component upstairs.
pub fn ohtsuki_exact_residues(rng: &mut impl Rng, u: &UpstairsBundle) -> ResidueData {
    let small = |rng: &mut dyn rand::RngCore| {
        Rational::of(rand::Rng::gen_range(rng, -3i64..=3), rand::Rng::gen_range(rng, 1i64..=3))
    };
    let mut entries: Vec<ResidueEntry> = Vec::new();
    let mut trace = vec![Rational::zero(); u.components().len()];
    let mut balancer: Vec<Option<usize>> = vec![None; u.components().len()];

    for (point, component, _) in fiber_labels(u.covering()) {
        let label = point.label();
        let dims: Vec<usize> = match u.bundle().flag_at(&label) {
            Some(fp) => fp.flag.steps().iter().map(|s| s.dim).collect(),
            None => vec![u.bundle().components()[component].rank],
        };
        let eigenvalues: Vec<Rational> = dims.iter().map(|_| small(rng)).collect();
        for (ev, &d) in eigenvalues.iter().zip(&dims) {
            trace[component] = trace[component].clone() + ev.scale(d as i64);
        }
        balancer[component] = Some(entries.len());
        entries.push(ResidueEntry { label, component, eigenvalues });
    }

    for (component, comp) in u.bundle().components().iter().enumerate() {
        let idx = balancer[component].expect("every component has fiber points");
        // shift the last eigenvalue so that trace = -degree
        let dims: Vec<usize> = match u.bundle().flag_at(&entries[idx].label) {
            Some(fp) => fp.flag.steps().iter().map(|s| s.dim).collect(),
            None => vec![comp.rank],
        };
        let last = entries[idx].eigenvalues.len() - 1;
        let d = dims[last] as i64;
        let deficit = trace[component].clone() + Rational::int(comp.degree);
        let correction = deficit.checked_div(&Rational::int(d)).expect("dim > 0");
        entries[idx].eigenvalues[last] = entries[idx].eigenvalues[last].clone() - correction;
    }

    ResidueData::new(entries).expect("fiber labels are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::{is_parabolic_connection, ohtsuki_check};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_coverings_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = InstanceConfig::pushforward_grid();
        for _ in 0..50 {
            let c = random_covering(&mut rng, &cfg);
            assert!(c.validate().is_valid());
            let comps = c.components().unwrap();
            let total: usize = comps.iter().map(|k| k.local_degree()).sum();
            assert_eq!(total, c.degree());
            // per component, the profile multiplicities over each marked
            // point add up to the local degree
            for comp in &comps {
                for x in c.base().marked_points() {
                    let within: usize = c
                        .ramification_profile(x)
                        .unwrap()
                        .iter()
                        .filter(|cycle| comp.contains(cycle.sheets[0]))
                        .map(|cycle| cycle.multiplicity)
                        .sum();
                    assert_eq!(within, comp.local_degree());
                }
            }
        }
    }

    #[test]
    fn generated_bundles_are_parabolic_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = InstanceConfig::pushforward_grid();
        for _ in 0..30 {
            let (u, r) = random_parabolic_instance(&mut rng, &cfg, false);
            assert!(is_parabolic_connection(u.bundle(), &r).unwrap());
        }
    }

    #[test]
    fn balanced_instances_have_par_deg_zero_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = InstanceConfig::pushforward_grid();
        for _ in 0..30 {
            let (u, r) = random_parabolic_instance(&mut rng, &cfg, true);
            assert!(ohtsuki_check(u.bundle(), &r).unwrap());
            assert!(u.bundle().par_deg().is_zero());
        }
    }

    #[test]
    fn ohtsuki_exact_residues_satisfy_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cfg = InstanceConfig::pushforward_grid();
        for _ in 0..30 {
            let u = random_upstairs(&mut rng, &cfg, false);
            let r = ohtsuki_exact_residues(&mut rng, &u);
            assert!(ohtsuki_check(u.bundle(), &r).unwrap());
        }
    }
}
