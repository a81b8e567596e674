//! System definition files (TOML). The format is documented in
//! `docs/system-files.md`.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{
    BlockExpr, DomainInterval, LipschitzEstimate, ScalarExpr, DEFAULT_GRID_POINTS, DEFAULT_PAIRS,
    DEFAULT_SAFETY_FACTOR,
};
use crate::rank::RankIndex;
use crate::system::{
    affine_matrix_system, max_minus_rank_system, phase_of, power_max_system, BlockSystem,
    InitialCondition, PowerTransform, RankSchedule, RankSystem, ScalarFamily,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefinition {
    name: Option<String>,
    memory: usize,
    period: usize,
    rank: Option<usize>,
    schedule: Option<Vec<usize>>,
    domain: Option<DomainInterval>,
    #[serde(default)]
    phase_offset: i64,
    initial: Option<Vec<f64>>,
    certify: Option<CertifySettings>,
    affine: Option<AffineSpec>,
    power: Option<PowerSpec>,
    family: Option<FamilySpec>,
    block: Option<BlockSpec>,
    max_minus_rank: Option<FunctionsSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineSpec {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSpec {
    a: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    #[serde(default = "default_transform")]
    transform: PowerTransform,
}

fn default_transform() -> PowerTransform {
    PowerTransform::Log
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySpec {
    functions: Option<Vec<String>>,
    grid: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockSpec {
    g: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionsSpec {
    functions: Vec<String>,
}

/// Sampling parameters for Lipschitz certification.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifySettings {
    pub grid_points: usize,
    pub safety_factor: f64,
    pub pairs: usize,
}

impl Default for CertifySettings {
    fn default() -> Self {
        CertifySettings {
            grid_points: DEFAULT_GRID_POINTS,
            safety_factor: DEFAULT_SAFETY_FACTOR,
            pairs: DEFAULT_PAIRS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    /// `P x M` matrices, rows in this crate's phase order.
    Affine { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    Power {
        a: Vec<Vec<f64>>,
        alphas: Vec<f64>,
        transform: PowerTransform,
    },
    /// `grid[i][phase]`.
    Grid(Vec<Vec<ScalarExpr>>),
    Functions(Vec<ScalarExpr>),
    /// One update per phase.
    Block(Vec<BlockExpr>),
    MaxMinusRank(Vec<ScalarExpr>),
}

impl SystemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemSpec::Affine { .. } => "affine",
            SystemSpec::Power { .. } => "power",
            SystemSpec::Grid(_) | SystemSpec::Functions(_) => "family",
            SystemSpec::Block(_) => "block",
            SystemSpec::MaxMinusRank(_) => "max-minus-rank",
        }
    }
}

/// A parsed and shape-checked system file. Per-phase data is already
/// re-indexed to phase `1 + ((n - 1) mod P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    pub name: String,
    pub memory: usize,
    pub period: usize,
    /// `None` for block and max-minus-rank systems.
    pub schedule: Option<RankSchedule>,
    pub domain: DomainInterval,
    pub phase_offset: i64,
    pub initial: Option<InitialCondition>,
    pub certify: CertifySettings,
    pub spec: SystemSpec,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Definition(msg.into())
}

/// `out[p - 1] = v[phase_of(p + offset) - 1]`.
fn rotate<T: Clone>(v: &[T], offset: i64) -> Vec<T> {
    let p = v.len();
    (1..=p as i64).map(|ph| v[phase_of(ph + offset, p) - 1].clone()).collect()
}

fn parse_scalars(srcs: &[String], what: &str) -> Result<Vec<ScalarExpr>> {
    srcs.iter()
        .enumerate()
        .map(|(i, s)| ScalarExpr::parse(s).map_err(|e| bad(format!("{what}[{}]: {e}", i + 1))))
        .collect()
}

impl SystemDefinition {
    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut def = SystemDefinition::from_toml_str(&src)?;
        if def.name.is_empty() {
            def.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(def)
    }

    pub fn from_toml_str(src: &str) -> Result<Self> {
        let raw: RawDefinition = toml::from_str(src).map_err(|e| bad(e.to_string()))?;
        let (m, p) = (raw.memory, raw.period);
        if m == 0 || p == 0 {
            return Err(bad("memory and period must be at least 1"));
        }
        let off = raw.phase_offset;
        let sections = [
            raw.affine.is_some(),
            raw.power.is_some(),
            raw.family.is_some(),
            raw.block.is_some(),
            raw.max_minus_rank.is_some(),
        ];
        if sections.iter().filter(|s| **s).count() != 1 {
            return Err(bad(
                "exactly one of [affine], [power], [family], [block], [max_minus_rank] is required",
            ));
        }

        let check_matrix = |a: &[Vec<f64>], what: &str| -> Result<()> {
            if a.len() != p || a.iter().any(|r| r.len() != m) {
                return Err(bad(format!("{what} must be {p} x {m} (period x memory)")));
            }
            Ok(())
        };
        let spec = if let Some(s) = raw.affine {
            check_matrix(&s.a, "affine.a")?;
            check_matrix(&s.b, "affine.b")?;
            SystemSpec::Affine {
                a: rotate(&s.a, off),
                b: rotate(&s.b, off),
            }
        } else if let Some(s) = raw.power {
            check_matrix(&s.a, "power.a")?;
            if s.alphas.len() != m {
                return Err(bad(format!("power.alphas must have {m} entries")));
            }
            SystemSpec::Power {
                a: rotate(&s.a, off),
                alphas: s.alphas,
                transform: s.transform,
            }
        } else if let Some(s) = raw.family {
            match (s.functions, s.grid) {
                (Some(fs), None) => {
                    if fs.len() != m {
                        return Err(bad(format!("family.functions must have {m} entries")));
                    }
                    SystemSpec::Functions(parse_scalars(&fs, "family.functions")?)
                }
                (None, Some(grid)) => {
                    if grid.len() != m || grid.iter().any(|r| r.len() != p) {
                        return Err(bad(format!("family.grid must be {m} x {p} (memory x period)")));
                    }
                    let rows = grid
                        .iter()
                        .enumerate()
                        .map(|(i, row)| {
                            parse_scalars(row, &format!("family.grid[{}]", i + 1))
                                .map(|r| rotate(&r, off))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    SystemSpec::Grid(rows)
                }
                _ => return Err(bad("[family] needs exactly one of functions or grid")),
            }
        } else if let Some(s) = raw.block {
            if s.g.len() != p {
                return Err(bad(format!("block.g must have {p} entries")));
            }
            let g = s
                .g
                .iter()
                .enumerate()
                .map(|(i, src)| {
                    BlockExpr::parse(src, m).map_err(|e| bad(format!("block.g[{}]: {e}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            SystemSpec::Block(rotate(&g, off))
        } else if let Some(s) = raw.max_minus_rank {
            if s.functions.len() != m {
                return Err(bad(format!("max_minus_rank.functions must have {m} entries")));
            }
            if p > m {
                return Err(bad(format!(
                    "max_minus_rank needs period <= memory (rank index reaches {p}, memory is {m})"
                )));
            }
            if off != 0 {
                return Err(bad("max_minus_rank fixes its own rank convention; phase_offset must be 0"));
            }
            SystemSpec::MaxMinusRank(parse_scalars(&s.functions, "max_minus_rank.functions")?)
        } else {
            unreachable!()
        };

        let rank_based = matches!(
            spec,
            SystemSpec::Affine { .. } | SystemSpec::Grid(_) | SystemSpec::Functions(_) | SystemSpec::Power { .. }
        );
        let has_rank = raw.rank.is_some() || raw.schedule.is_some();
        let schedule = match (raw.rank, raw.schedule) {
            (Some(_), Some(_)) => return Err(bad("give either rank or schedule, not both")),
            _ if !rank_based && has_rank => {
                return Err(bad(format!("{} systems take no rank", spec.kind())))
            }
            _ if !rank_based => None,
            (k, None) => {
                let k = RankIndex::new(k.unwrap_or(1)).map_err(|e| bad(e.to_string()))?;
                Some(RankSchedule::constant(k, p)?)
            }
            (None, Some(ks)) => {
                if ks.len() != p {
                    return Err(bad(format!("schedule must have {p} entries")));
                }
                let ks = ks
                    .into_iter()
                    .map(|k| RankIndex::new(k).map_err(|e| bad(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                Some(RankSchedule::new(ks)?.with_offset(off))
            }
        };
        if let Some(s) = &schedule {
            s.check(m).map_err(|e| bad(e.to_string()))?;
            if matches!(spec, SystemSpec::Power { .. }) && s.ks().iter().any(|k| *k != RankIndex::TOP) {
                return Err(bad("power systems are max systems (rank 1)"));
            }
        }

        let domain = raw.domain.unwrap_or_default();
        if let SystemSpec::Power {
            transform: PowerTransform::Raw,
            ..
        } = spec
        {
            if domain.lo() <= 0.0 {
                return Err(bad("raw power systems need a positive domain"));
            }
        }
        let initial = raw
            .initial
            .map(|v| {
                if v.len() != m {
                    return Err(bad(format!("initial must have {m} entries")));
                }
                InitialCondition::new(v).map_err(|e| bad(e.to_string()))
            })
            .transpose()?;
        let certify = raw.certify.unwrap_or_default();
        if certify.grid_points < 2 || certify.pairs == 0 || !(certify.safety_factor >= 1.0) {
            return Err(bad("certify needs grid_points >= 2, pairs >= 1, safety_factor >= 1"));
        }

        Ok(SystemDefinition {
            name: raw.name.unwrap_or_default(),
            memory: m,
            period: p,
            schedule,
            domain,
            phase_offset: off,
            initial,
            certify,
            spec,
        })
    }

    /// Assembles the system and attaches Lipschitz certificates. `rng_seed`
    /// drives pair sampling for block systems.
    pub fn build(&self, rng_seed: u64) -> Result<BuiltSystem> {
        let (m, p) = (self.memory, self.period);
        let c = &self.certify;
        let mut certificates = Vec::new();
        let family_certs = |fam: &mut ScalarFamily, certs: &mut Vec<Certificate>| -> Result<()> {
            let parts = fam.certify(self.domain, c.grid_points, c.safety_factor)?;
            for (j, est) in parts.into_iter().enumerate() {
                certs.push(Certificate {
                    label: format!("f{}[phase {}]", j / p + 1, j % p + 1),
                    estimate: est,
                });
            }
            Ok(())
        };
        let exact_certs = |fam: &ScalarFamily, certs: &mut Vec<Certificate>| {
            for i in 1..=m {
                for ph in 1..=p {
                    let slope = fam
                        .entry(i, ph)
                        .affine_coefficients(ph as i64)
                        .map_or(f64::NAN, |(s, _)| s.abs());
                    certs.push(Certificate {
                        label: format!("f{i}[phase {ph}]"),
                        estimate: LipschitzEstimate::exact(slope),
                    });
                }
            }
        };

        let sched = || self.schedule.clone().expect("rank-based spec has a schedule");
        let (rank, block) = match &self.spec {
            SystemSpec::Affine { a, b } => {
                let k = sched().k_at(1);
                let (fam, _) = affine_matrix_system(a, b, k)?;
                exact_certs(&fam, &mut certificates);
                let rs = RankSystem::new(fam, sched())?;
                let block = rs.to_block();
                (Some(rs), block)
            }
            SystemSpec::Power { a, alphas, transform } => {
                let (mut fam, s) = power_max_system(a, alphas, *transform)?;
                match transform {
                    PowerTransform::Log => exact_certs(&fam, &mut certificates),
                    PowerTransform::Raw => family_certs(&mut fam, &mut certificates)?,
                }
                let rs = RankSystem::new(fam, s)?;
                let block = rs.to_block();
                (Some(rs), block)
            }
            SystemSpec::Grid(_) | SystemSpec::Functions(_) => {
                let mut fam = match &self.spec {
                    SystemSpec::Grid(g) => ScalarFamily::new(g.clone())?,
                    SystemSpec::Functions(fs) => ScalarFamily::from_functions(fs.clone(), p)?,
                    _ => unreachable!(),
                };
                family_certs(&mut fam, &mut certificates)?;
                let rs = RankSystem::new(fam, sched())?;
                let block = rs.to_block();
                (Some(rs), block)
            }
            SystemSpec::Block(g) => {
                let mut block = BlockSystem::new(m, g.clone())?;
                let parts = block.certify(self.domain, c.pairs, rng_seed)?;
                for (j, est) in parts.into_iter().enumerate() {
                    certificates.push(Certificate {
                        label: format!("G{}", j + 1),
                        estimate: est,
                    });
                }
                (None, block)
            }
            SystemSpec::MaxMinusRank(fs) => {
                let mut fam = ScalarFamily::from_functions(fs.clone(), p)?;
                family_certs(&mut fam, &mut certificates)?;
                (None, max_minus_rank_system(&fam)?)
            }
        };
        Ok(BuiltSystem {
            name: self.name.clone(),
            kind: self.spec.kind(),
            rank,
            block,
            certificates,
        })
    }

    /// The file's `initial`, or a constant vector at the default seed value.
    pub fn initial_or_default(&self) -> InitialCondition {
        self.initial
            .clone()
            .unwrap_or_else(|| InitialCondition::new(vec![self.default_seed_value(); self.memory]).unwrap())
    }

    /// `1` for systems living on a positive domain, else `0`.
    pub fn default_seed_value(&self) -> f64 {
        if self.domain.lo() > 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub label: String,
    pub estimate: LipschitzEstimate,
}

#[derive(Debug, Clone)]
pub struct BuiltSystem {
    pub name: String,
    pub kind: &'static str,
    /// The rank form, for rank-type files.
    pub rank: Option<RankSystem>,
    pub block: BlockSystem,
    pub certificates: Vec<Certificate>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Recurrence;

    #[test]
    fn affine_file() {
        let def = SystemDefinition::from_toml_str(
            r#"
            name = "two-phase"
            memory = 2
            period = 2
            rank = 1
            [affine]
            a = [[0.5, -0.2], [0.1, 0.7]]
            b = [[1, 2], [3, 4]]
            "#,
        )
        .unwrap();
        assert_eq!(def.spec.kind(), "affine");
        let built = def.build(0).unwrap();
        assert_eq!(built.block.l_bound().unwrap().bound, 0.7);
        assert_eq!(built.certificates.len(), 4);
        assert_eq!(built.certificates[3].label, "f2[phase 2]");
        assert_eq!(built.certificates[3].estimate.bound, 0.7);
    }

    #[test]
    fn phase_offset_rotates_rows() {
        let src = |off: i64| {
            format!(
                "memory = 1\nperiod = 3\nphase_offset = {off}\n[affine]\na = [[0.1], [0.2], [0.3]]\nb = [[1], [2], [3]]\n"
            )
        };
        let def = SystemDefinition::from_toml_str(&src(1)).unwrap();
        match &def.spec {
            SystemSpec::Affine { b, .. } => assert_eq!(b, &vec![vec![2.0], vec![3.0], vec![1.0]]),
            _ => unreachable!(),
        }
        let plain = SystemDefinition::from_toml_str(&src(0)).unwrap().build(0).unwrap();
        let shifted = def.build(0).unwrap();
        // phase p of the shifted file is phase p + 1 of the plain one
        assert_eq!(
            shifted.block.step(1, &[0.0]).unwrap(),
            plain.block.step(2, &[0.0]).unwrap()
        );
    }

    #[test]
    fn block_and_family_files() {
        let def = SystemDefinition::from_toml_str(
            "memory = 2\nperiod = 1\ndomain = [-3, 3]\n[block]\ng = [\"0.5*(max(y1,y2) - rank(2; y1, y2))\"]\n",
        )
        .unwrap();
        let built = def.build(7).unwrap();
        assert!(built.rank.is_none());
        assert!(built.block.l_bound().unwrap().bound <= 1.0 + 1e-12);

        let def = SystemDefinition::from_toml_str(
            "memory = 3\nperiod = 4\nrank = 2\ndomain = [-5, 5]\n[certify]\nsafety_factor = 1.0\n\
             [family]\nfunctions = [\"exp(0.1*sin(0.7 + 2*pi*n/4) - x^2)\", \"exp(0.12*sin(0.7 + 2*pi*n/4) - x^2)\", \"exp(0.14*sin(0.7 + 2*pi*n/4) - x^2)\"]\n",
        )
        .unwrap();
        let built = def.build(0).unwrap();
        assert_eq!(built.certificates.len(), 12);
        assert!(built.block.is_certified());
    }

    #[test]
    fn malformed_files() {
        for (src, needle) in [
            ("memory = 1\nperiod = 1\n", "exactly one"),
            ("memory = 1\nperiod = 1\n[affine]\na = [[0.5]]\nb = [[1, 2]]\n", "affine.b"),
            ("memory = 1\nperiod = 1\nbogus = 3\n[affine]\na = [[0.5]]\nb = [[1]]\n", "bogus"),
            ("memory = 2\nperiod = 1\nrank = 3\n[family]\nfunctions = [\"x\", \"x\"]\n", "rank 3"),
            ("memory = 1\nperiod = 1\n[family]\nfunctions = [\"x +\"]\n", "family.functions[1]"),
            ("memory = 1\nperiod = 1\n[block]\ng = [\"y2\"]\n", "block.g[1]"),
            ("memory = 1\nperiod = 2\n[max_minus_rank]\nfunctions = [\"0.5*x\"]\n", "period <= memory"),
            ("memory = 1\nperiod = 1\n[power]\na = [[2]]\nalphas = [0.5]\ntransform = \"raw\"\n", "positive domain"),
            ("memory = 1\nperiod = 1\nrank = 1\n[block]\ng = [\"y1\"]\n", "no rank"),
            ("memory = 1\nperiod = 1\ninitial = [1, 2]\n[block]\ng = [\"y1\"]\n", "initial"),
            ("memory = [1\n", "TOML"),
        ] {
            let err = SystemDefinition::from_toml_str(src).unwrap_err();
            assert!(matches!(err, Error::Definition(_)), "{src}: {err}");
            let msg = err.to_string();
            assert!(
                msg.contains(needle) || (needle == "TOML" && msg.contains("expected")),
                "{src}: {msg}"
            );
        }
    }
}
