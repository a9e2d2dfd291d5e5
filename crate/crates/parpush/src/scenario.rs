//! The scenario file format: one self-describing JSON document with six
//! optional sections, shared by inputs, machine-readable outputs and golden
//! fixtures. Version tag `parpush/1`.
//!
//! Rationals travel as strings `"p/q"` (bare integers accepted on input),
//! permutations as 1-based one-line lists (`[2,1,3]`) with cycle lists
//! (`[[1,2],[3]]`) accepted on input.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hurwitz::{CoveringMonodromy, MarkedCurve, Permutation, YPoint};
use crate::parabolic::{
    BundleComponent, FlagStep, FlaggedPoint, ParabolicBundle, ResidueData, ResidueEntry,
    WeightedFlag,
};
use crate::pushforward::UpstairsBundle;
use crate::rational::Rational;
use crate::torus::RamifiedTorusData;

pub const FORMAT_VERSION: &str = "parpush/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<CurveDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covering: Option<CoveringDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upstairs: Option<UpstairsDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub downstairs: Option<BundleDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residues: Option<ResidueDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torus: Option<TorusDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDoc {
    pub genus: usize,
    pub marked_points: Vec<String>,
}

/// One-line notation on output; cycle notation accepted on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PermDoc {
    OneLine(Vec<usize>),
    Cycles(Vec<Vec<usize>>),
}

impl PermDoc {
    pub fn build(&self, degree: usize) -> Result<Permutation> {
        match self {
            PermDoc::OneLine(entries) => {
                if entries.len() != degree {
                    return Err(Error::Parse(format!(
                        "permutation {entries:?} has length {}, expected {degree}",
                        entries.len()
                    )));
                }
                Permutation::from_one_line(entries)
            }
            PermDoc::Cycles(cycles) => Permutation::from_cycles(degree, cycles),
        }
    }

    pub fn of(p: &Permutation) -> PermDoc {
        PermDoc::OneLine(p.one_line())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringDoc {
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub handles: Vec<PermDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub branch: BTreeMap<String, PermDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDoc {
    pub dim: usize,
    pub weight: Rational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagDoc {
    pub point: String,
    pub steps: Vec<StepDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstairsDoc {
    pub components: Vec<BundleComponent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<FlagDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDoc {
    pub rank: usize,
    pub degree: i64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<FlagDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidueDoc {
    pub entries: Vec<ResidueEntryDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidueEntryDoc {
    pub point: String,
    pub eigenvalues: Vec<Rational>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusDoc {
    pub block_ranks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub handles: Vec<PermDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub branch: BTreeMap<String, PermDoc>,
}

/// A fully validated scenario.
#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub base: Option<MarkedCurve>,
    pub covering: Option<CoveringMonodromy>,
    pub upstairs: Option<UpstairsBundle>,
    pub downstairs: Option<ParabolicBundle>,
    pub residues: Option<ResidueData>,
    pub torus: Option<RamifiedTorusData>,
}

fn flags_from_docs(docs: &[FlagDoc]) -> Result<Vec<FlaggedPoint>> {
    docs.iter()
        .map(|doc| {
            let steps: Vec<FlagStep> = doc
                .steps
                .iter()
                .map(|s| FlagStep { dim: s.dim, weight: s.weight.clone() })
                .collect();
            let flag = WeightedFlag::new(steps)?;
            let component = point_component(&doc.point)?;
            Ok(FlaggedPoint { label: doc.point.clone(), component, flag })
        })
        .collect()
}

/// Components are derivable from the label: canonical upstairs names carry
/// them; base labels live on the single component of the connected base.
fn point_component(label: &str) -> Result<usize> {
    if label.contains(':') {
        Ok(YPoint::parse(label)?.component)
    } else {
        Ok(0)
    }
}

fn flags_to_docs(bundle: &ParabolicBundle) -> Vec<FlagDoc> {
    bundle
        .flags()
        .iter()
        .map(|fp| FlagDoc {
            point: fp.label.clone(),
            steps: fp
                .flag
                .steps()
                .iter()
                .map(|s| StepDoc { dim: s.dim, weight: s.weight.clone() })
                .collect(),
        })
        .collect()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let doc: ScenarioDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn from_doc(doc: &ScenarioDoc) -> Result<Scenario> {
        if doc.version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported version {:?}, expected {FORMAT_VERSION:?}",
                doc.version
            )));
        }
        let mut scenario = Scenario::default();

        if let Some(curve) = &doc.base {
            scenario.base =
                Some(MarkedCurve::new(curve.genus, curve.marked_points.clone())?);
        }

        if let Some(cov) = &doc.covering {
            let base = scenario
                .base
                .clone()
                .ok_or_else(|| Error::Parse("covering section requires a base section".into()))?;
            let handles = cov
                .handles
                .iter()
                .map(|p| p.build(cov.degree))
                .collect::<Result<Vec<_>>>()?;
            let branch = cov
                .branch
                .iter()
                .map(|(label, p)| Ok((label.clone(), p.build(cov.degree)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            scenario.covering = Some(CoveringMonodromy::new(base, cov.degree, handles, branch)?);
        }

        if let Some(up) = &doc.upstairs {
            let covering = scenario
                .covering
                .clone()
                .ok_or_else(|| Error::Parse("upstairs section requires a covering section".into()))?;
            let bundle = ParabolicBundle::new(up.components.clone(), flags_from_docs(&up.flags)?)?;
            scenario.upstairs = Some(UpstairsBundle::new(covering, bundle)?);
        }

        if let Some(down) = &doc.downstairs {
            scenario.downstairs = Some(ParabolicBundle::new(
                vec![BundleComponent { rank: down.rank, degree: down.degree }],
                flags_from_docs(&down.flags)?,
            )?);
        }

        if let Some(res) = &doc.residues {
            let entries = res
                .entries
                .iter()
                .map(|e| {
                    Ok(ResidueEntry {
                        label: e.point.clone(),
                        component: point_component(&e.point)?,
                        eigenvalues: e.eigenvalues.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            scenario.residues = Some(ResidueData::new(entries)?);
        }

        if let Some(torus) = &doc.torus {
            let n = torus.block_ranks.len();
            let handles = torus
                .handles
                .iter()
                .map(|p| p.build(n))
                .collect::<Result<Vec<_>>>()?;
            let branch = torus
                .branch
                .iter()
                .map(|(label, p)| Ok((label.clone(), p.build(n)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            scenario.torus = Some(RamifiedTorusData::new(torus.block_ranks.clone(), handles, branch)?);
        }

        Ok(scenario)
    }

    pub fn to_doc(&self) -> ScenarioDoc {
        ScenarioDoc {
            version: FORMAT_VERSION.to_string(),
            base: self.base.as_ref().map(curve_to_doc),
            covering: self.covering.as_ref().map(covering_to_doc),
            upstairs: self.upstairs.as_ref().map(upstairs_to_doc),
            downstairs: self.downstairs.as_ref().map(bundle_to_doc),
            residues: self.residues.as_ref().map(residues_to_doc),
            torus: self.torus.as_ref().map(torus_to_doc),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(&self.to_doc())
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut out = serde_json::to_string_pretty(doc).expect("serializable documents");
    out.push('\n');
    out
}

pub fn curve_to_doc(curve: &MarkedCurve) -> CurveDoc {
    CurveDoc { genus: curve.genus(), marked_points: curve.marked_points().to_vec() }
}

pub fn covering_to_doc(covering: &CoveringMonodromy) -> CoveringDoc {
    CoveringDoc {
        degree: covering.degree(),
        handles: covering.handles().iter().map(PermDoc::of).collect(),
        branch: covering
            .branch_perms()
            .iter()
            .filter(|(_, p)| !p.is_identity())
            .map(|(label, p)| (label.clone(), PermDoc::of(p)))
            .collect(),
    }
}

pub fn upstairs_to_doc(upstairs: &UpstairsBundle) -> UpstairsDoc {
    UpstairsDoc {
        components: upstairs.bundle().components().to_vec(),
        flags: flags_to_docs(upstairs.bundle()),
    }
}

pub fn bundle_to_doc(bundle: &ParabolicBundle) -> BundleDoc {
    BundleDoc {
        rank: bundle.components()[0].rank,
        degree: bundle.components()[0].degree,
        flags: flags_to_docs(bundle),
    }
}

pub fn residues_to_doc(residues: &ResidueData) -> ResidueDoc {
    ResidueDoc {
        entries: residues
            .entries()
            .iter()
            .map(|e| ResidueEntryDoc { point: e.label.clone(), eigenvalues: e.eigenvalues.clone() })
            .collect(),
    }
}

pub fn torus_to_doc(torus: &RamifiedTorusData) -> TorusDoc {
    TorusDoc {
        block_ranks: torus.block_ranks().to_vec(),
        handles: torus.handles().iter().map(PermDoc::of).collect(),
        branch: torus
            .branch()
            .iter()
            .filter(|(_, p)| !p.is_identity())
            .map(|(label, p)| (label.clone(), PermDoc::of(p)))
            .collect(),
    }
}

// machine-readable outputs of the scalar commands

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PardegDoc {
    pub version: String,
    pub pardeg: Rational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub sheets: Vec<usize>,
    pub local_degree: usize,
    pub genus: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateDoc {
    pub version: String,
    pub valid: bool,
    pub violations: Vec<String>,
    pub components: Vec<ComponentDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripDoc {
    pub version: String,
    pub covering_roundtrip: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub connection_roundtrip: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheckDoc {
    pub point: String,
    pub multiplicity: usize,
    pub weights_match: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residues_match: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDoc {
    pub version: String,
    pub checks: Vec<OracleCheckDoc>,
    pub all_match: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestDoc {
    pub version: String,
    pub seed: u64,
    pub instances: usize,
    pub failures: usize,
    pub checks: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARING: &str = r#"{
        "version": "parpush/1",
        "base": {"genus": 0, "marked_points": ["z0", "zinf"]},
        "covering": {"degree": 2, "branch": {"z0": [[1, 2]], "zinf": [2, 1]}},
        "upstairs": {"components": [{"rank": 1, "degree": 0}]}
    }"#;

    #[test]
    fn load_squaring_scenario() {
        let s = Scenario::from_json(SQUARING).unwrap();
        let u = s.upstairs.unwrap();
        assert_eq!(u.covering().degree(), 2);
        let pushed = u.push_forward().unwrap();
        assert_eq!(pushed.components()[0].degree, -1);
    }

    #[test]
    fn cycle_and_one_line_forms_agree() {
        let s = Scenario::from_json(SQUARING).unwrap();
        let c = s.covering.unwrap();
        assert_eq!(c.branch_perm("z0").unwrap(), c.branch_perm("zinf").unwrap());
    }

    #[test]
    fn version_is_checked() {
        let bad = SQUARING.replace("parpush/1", "parpush/2");
        assert!(matches!(Scenario::from_json(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = SQUARING.replace("\"version\"", "\"extra\": 1, \"version\"");
        assert!(matches!(Scenario::from_json(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn nonincreasing_weights_rejected() {
        let text = r#"{
            "version": "parpush/1",
            "downstairs": {"rank": 2, "degree": 0, "flags": [
                {"point": "x", "steps": [
                    {"dim": 1, "weight": "1/2"},
                    {"dim": 1, "weight": "1/2"}
                ]}
            ]}
        }"#;
        assert!(Scenario::from_json(text).is_err());
    }

    #[test]
    fn randomized_scenarios_roundtrip_through_json() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let cfg = crate::gen::InstanceConfig::roundtrip_grid();
        for _ in 0..40 {
            let u = crate::gen::random_upstairs(&mut rng, &cfg, false);
            let scenario = Scenario {
                base: Some(u.covering().base().clone()),
                covering: Some(u.covering().clone()),
                residues: Some(crate::parabolic::parabolic_residues(u.bundle())),
                torus: Some(crate::torus::torus_from_direct_image(&u)),
                downstairs: Some(u.push_forward().unwrap()),
                upstairs: Some(u),
            };
            let text = scenario.to_json();
            let reloaded = Scenario::from_json(&text).unwrap();
            assert_eq!(reloaded.upstairs.as_ref().unwrap(), scenario.upstairs.as_ref().unwrap());
            assert_eq!(reloaded.downstairs, scenario.downstairs);
            assert_eq!(reloaded.residues, scenario.residues);
            assert_eq!(reloaded.torus, scenario.torus);
            assert_eq!(reloaded.to_json(), text);
        }
    }

    #[test]
    fn emitted_documents_reparse_to_equal_data() {
        let s = Scenario::from_json(SQUARING).unwrap();
        let mut full = s.clone();
        full.downstairs = Some(s.upstairs.as_ref().unwrap().push_forward().unwrap());
        full.residues = Some(
            s.upstairs
                .as_ref()
                .unwrap()
                .push_forward_residues(&crate::parabolic::ResidueData::empty())
                .unwrap(),
        );
        full.torus = Some(crate::torus::torus_from_direct_image(s.upstairs.as_ref().unwrap()));

        let text = full.to_json();
        let reloaded = Scenario::from_json(&text).unwrap();
        assert_eq!(reloaded.to_json(), text);
        assert_eq!(
            reloaded.downstairs.as_ref().unwrap(),
            full.downstairs.as_ref().unwrap()
        );
        assert_eq!(reloaded.residues.as_ref().unwrap(), full.residues.as_ref().unwrap());
        assert_eq!(reloaded.torus.as_ref().unwrap(), full.torus.as_ref().unwrap());
    }
}
