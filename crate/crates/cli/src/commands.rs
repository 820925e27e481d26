use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use etdb::balance::{
    ac_dual, ac_dual_in_bases, balance_report, check_etdb_in_basis, dual_channel,
    dual_channel_in_bases, invertible_output_state, kms_dual, Check, Outcome,
};
use etdb::catalog;
use etdb::channel::{cj_relative_in_basis, Channel, DensityMatrix};
use etdb::classical::{
    check_classical_db, check_classical_db_parity, embed, reverse_chain, ClassicalCheck,
    MarkovChain,
};
use etdb::linalg::CMatrix;
use etdb::parity::{
    check_etdb_p_in_basis, check_sqdb_theta, parity_dual, reflection_parity, ParityOp,
};
use etdb::random::SeededRng;
use etdb::schema::{self, BasisDoc, ChainDoc, ChannelDoc, OperatorDoc, StateDoc};
use etdb::transitions::decompose;
use etdb::{Error, ToleranceConfig};
use serde::{Deserialize, Serialize};

use crate::args::{CheckKind, Cli, Command, DualKind, Format, Inputs};
use crate::report::{decomposition_text, CheckReport, DualReport, SelfCheck};

pub fn run(cli: &Cli) -> Result<u8> {
    let mut tol = ToleranceConfig::default();
    if let Some(t) = cli.tol {
        tol = tol.with_check_tolerance(t);
    }
    tol.validate()?;
    let basis = cli.basis.as_deref().map(load_basis).transpose()?;
    let ctx = Session {
        tol,
        basis,
        format: cli.format,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Check { kind, inputs } => ctx.check(*kind, inputs),
        Command::Dual {
            kind,
            inputs,
            parity_out,
            output,
        } => ctx.dual(*kind, inputs, parity_out.as_deref(), output.as_deref()),
        Command::Decompose { inputs } => ctx.decompose(inputs),
        Command::Generate { example, out } => ctx.generate(example, out),
        Command::Embed {
            chain,
            output,
            state_out,
        } => ctx.embed(chain, output.as_deref(), state_out.as_deref()),
        Command::Reverse { chain, output } => ctx.reverse(chain, output.as_deref()),
    }
}

/// Exit status for an error that escaped a command.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NonInvertibleSigma { .. } | Error::ZeroSigmaComponent { .. }) => 2,
        _ => 3,
    }
}

struct Session {
    tol: ToleranceConfig,
    basis: Option<CMatrix>,
    format: Format,
    seed: u64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    schema::parse(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_basis(path: &Path) -> Result<CMatrix> {
    Ok(load::<BasisDoc>(path)?.basis)
}

fn load_chain(path: &Path) -> Result<(MarkovChain, Option<Vec<usize>>)> {
    load::<ChainDoc>(path)?
        .into_chain()
        .with_context(|| format!("in {}", path.display()))
}

fn load_parity(path: &Path) -> Result<ParityOp> {
    load::<OperatorDoc>(path)?
        .into_parity()
        .with_context(|| format!("in {}", path.display()))
}

/// Writes to stdout, ignoring a reader that has gone away.
fn out(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!("missing --{flag}"))
}

fn classical_check(c: ClassicalCheck, notes: &mut Vec<String>) -> Outcome {
    if let Some((i, j)) = c.worst_pair {
        notes.push(format!(
            "largest violation at states ({}, {})",
            i + 1,
            j + 1
        ));
    }
    Outcome::Evaluated(Check {
        residual: c.max_violation,
        tolerance: 1e-12,
        passed: c.passed,
    })
}

impl Session {
    fn load_pair(&self, inputs: &Inputs) -> Result<(Channel, DensityMatrix)> {
        if let Some(path) = &inputs.chain {
            let (mc, _) = load_chain(path)?;
            let rho = DensityMatrix::diagonal(mc.rho(), &self.tol)?;
            return Ok((embed(&mc)?, rho));
        }
        let ch_path = required(&inputs.channel, "channel")?;
        let ch = schema::parse_channel(&read(ch_path)?)
            .with_context(|| format!("in {}", ch_path.display()))?;
        let st_path = required(&inputs.state, "state")?;
        let rho = load::<StateDoc>(st_path)?
            .into_state(&self.tol)
            .with_context(|| format!("in {}", st_path.display()))?;
        Ok((ch, rho))
    }

    fn rho_basis(&self, rho: &DensityMatrix) -> CMatrix {
        self.basis.clone().unwrap_or_else(|| rho.basis().clone())
    }

    fn no_basis_override(&self, what: &str) -> Result<()> {
        if self.basis.is_some() {
            bail!("--basis is not supported for {what}");
        }
        Ok(())
    }

    fn emit(&self, text: String, json: String) {
        match self.format {
            Format::Text => out(&text),
            Format::Json => out(&format!("{json}\n")),
        }
    }

    fn check(&self, kind: CheckKind, inputs: &Inputs) -> Result<u8> {
        let report = match self.build_check(kind, inputs) {
            Err(e)
                if matches!(
                    e.downcast_ref::<Error>(),
                    Some(Error::NonInvertibleSigma { .. })
                ) =>
            {
                let name = kind_name(kind);
                CheckReport::new(
                    name,
                    vec![(name, Outcome::not_evaluable(e.to_string()))],
                    self.tol,
                )
            }
            other => other?,
        };
        self.emit(report.to_text(), schema::to_json(&report));
        Ok(report.exit_code())
    }

    fn build_check(&self, kind: CheckKind, inputs: &Inputs) -> Result<CheckReport> {
        let tol = &self.tol;
        let name = kind_name(kind);
        Ok(match kind {
            CheckKind::Etdb => {
                let (ch, rho) = self.load_pair(inputs)?;
                let basis = self.rho_basis(&rho);
                let c = check_etdb_in_basis(&ch, &rho, &basis, tol)?;
                let mut r = CheckReport::new(name, vec![("etdb", Outcome::Evaluated(c))], *tol);
                r.basis = Some(basis);
                r
            }
            CheckKind::Sqdb => {
                self.no_basis_override("sqdb")?;
                let (ch, rho) = self.load_pair(inputs)?;
                let b = balance_report(&ch, &rho, tol)?;
                let mut r = CheckReport::new(
                    name,
                    vec![("invariance", b.invariance), ("sqdb", b.sqdb)],
                    *tol,
                );
                r.basis = Some(b.basis);
                r
            }
            CheckKind::EtdbP => {
                let (ch, rho) = self.load_pair(inputs)?;
                let p = load_parity(required(&inputs.parity, "parity")?)?;
                let basis = self.rho_basis(&rho);
                let c = check_etdb_p_in_basis(&ch, &rho, &p, &basis, tol)?;
                let mut r =
                    CheckReport::new(name, vec![("etdb_p", Outcome::Evaluated(c.check))], *tol);
                if !c.commutes {
                    r.notes.push(format!(
                        "parity does not fix the state (residual {}); invariance is not implied",
                        etdb::balance::fmt_real(c.commutation_residual)
                    ));
                }
                r.basis = Some(basis);
                r.parity = Some(OperatorDoc::from_parity(&p));
                r
            }
            CheckKind::SqdbTheta => {
                self.no_basis_override("sqdb-theta")?;
                let (ch, rho) = self.load_pair(inputs)?;
                let path = required(&inputs.theta, "theta")?;
                let th = load::<OperatorDoc>(path)?
                    .into_reversing()
                    .with_context(|| format!("in {}", path.display()))?;
                let c = check_sqdb_theta(&ch, &rho, &th, tol)?;
                let mut r = CheckReport::new(
                    name,
                    vec![
                        ("invariance", Outcome::Evaluated(c.invariance)),
                        ("sqdb_theta", Outcome::Evaluated(c.kms_form)),
                    ],
                    *tol,
                );
                r.notes.push(format!(
                    "transposition form residual {}, difference between forms {}",
                    etdb::balance::fmt_real(c.ac_form.residual),
                    etdb::balance::fmt_real(c.form_discrepancy)
                ));
                r.basis = Some(c.basis);
                r.parity = Some(OperatorDoc::from_parity(&c.parity));
                r
            }
            CheckKind::Classical => {
                let (mc, _) = load_chain(required(&inputs.chain, "chain")?)?;
                let mut notes = Vec::new();
                let outcome = classical_check(check_classical_db(&mc)?, &mut notes);
                let mut r = CheckReport::new(name, vec![("classical", outcome)], *tol);
                r.notes = notes;
                r
            }
            CheckKind::ClassicalP => {
                let (mc, pi) = load_chain(required(&inputs.chain, "chain")?)?;
                let pi = pi.ok_or_else(|| anyhow!("chain file has no \"pi\""))?;
                let mut notes = Vec::new();
                let outcome = classical_check(check_classical_db_parity(&mc, &pi)?, &mut notes);
                let mut r = CheckReport::new(name, vec![("classical_p", outcome)], *tol);
                r.notes = notes;
                r
            }
        })
    }

    fn dual(
        &self,
        kind: DualKind,
        inputs: &Inputs,
        parity_out: Option<&Path>,
        output: Option<&Path>,
    ) -> Result<u8> {
        let tol = &self.tol;
        let (ch, rho) = self.load_pair(inputs)?;
        let sigma = invertible_output_state(&ch, &rho, tol)?;
        let (dual, relation, input, expected) = match kind {
            DualKind::Prime => {
                let dual = match &self.basis {
                    Some(b) => dual_channel_in_bases(&ch, &rho, b, &sigma, sigma.basis(), tol)?,
                    None => dual_channel(&ch, &rho, tol)?,
                };
                (
                    dual,
                    "E'(sigma) = rho",
                    sigma.matrix().clone(),
                    rho.matrix().clone(),
                )
            }
            DualKind::Ac => {
                let dual = match &self.basis {
                    Some(b) => ac_dual_in_bases(&ch, &rho, b, &sigma, sigma.basis(), tol)?,
                    None => ac_dual(&ch, &rho, tol)?,
                };
                (
                    dual,
                    "E^AC(sigma) = rho",
                    sigma.matrix().clone(),
                    rho.matrix().clone(),
                )
            }
            DualKind::Kms => {
                self.no_basis_override("the KMS dual")?;
                let dual = kms_dual(&ch, &rho, tol)?;
                (
                    dual,
                    "E^KMS(sigma) = rho",
                    sigma.matrix().clone(),
                    rho.matrix().clone(),
                )
            }
            DualKind::Parity => {
                self.no_basis_override("the parity dual")?;
                let pa = load_parity(required(&inputs.parity, "parity")?)?;
                let pb = match parity_out {
                    Some(p) => load_parity(p)?,
                    None => pa.clone(),
                };
                let dual = parity_dual(&ch, &rho, &pa, &pb, tol)?;
                (
                    dual,
                    "E^P(P(sigma)) = P(rho)",
                    pb.apply(sigma.matrix())?,
                    pa.apply(rho.matrix())?,
                )
            }
        };
        let residual = dual.apply(&input)?.distance(&expected);
        let report = DualReport {
            kind: dual_name(kind).to_string(),
            channel: ChannelDoc::from_channel(&dual),
            self_check: SelfCheck {
                relation: relation.to_string(),
                check: Check::new(residual, tol.inv),
            },
        };
        let json = schema::to_json(&report);
        if let Some(path) = output {
            write(path, &json)?;
        }
        self.emit(report.to_text(), json);
        Ok(0)
    }

    fn decompose(&self, inputs: &Inputs) -> Result<u8> {
        let (ch, rho) = self.load_pair(inputs)?;
        let basis = self.rho_basis(&rho);
        let rc = cj_relative_in_basis(&ch, &rho, &basis, &self.tol)?;
        let report = decompose(&rc, &self.tol)?.report()?;
        self.emit(decomposition_text(&report), schema::to_json(&report));
        Ok(0)
    }

    fn generate(&self, example: &str, out: &Path) -> Result<u8> {
        let (name, m) = match example.split_once(':') {
            Some((n, m)) => {
                let m: usize = m
                    .parse()
                    .with_context(|| format!("bad dimension in {example:?}"))?;
                if m < 2 {
                    bail!("dimension must be at least 2");
                }
                (n, Some(m))
            }
            None => (example, None),
        };
        let mut rng = SeededRng::new(self.seed);
        let mut files = Vec::new();
        let mut parity = None;
        let mut chain = None;
        let (pair, checks, seeded): (Option<(Channel, DensityMatrix)>, Vec<&str>, bool) =
            match (name, m) {
                ("cycle3", None) => (Some(catalog::cycle3(0.5)), vec!["etdb", "sqdb"], false),
                ("depolarizing2", None) => {
                    (Some(catalog::depolarizing2()), vec!["etdb", "sqdb"], false)
                }
                ("shift-clock", Some(m)) => {
                    parity = Some(reflection_parity(m));
                    (Some(catalog::shift_channel(m)), vec!["etdb-p"], false)
                }
                ("classical-db3", None) => {
                    let mc = catalog::classical_db3();
                    let rho = DensityMatrix::diagonal(mc.rho(), &self.tol)?;
                    let ch = embed(&mc)?;
                    chain = Some(mc);
                    (Some((ch, rho)), vec!["classical", "etdb"], false)
                }
                ("random-etdb", Some(m)) => (Some(rng.random_etdb(m)), vec!["etdb", "sqdb"], true),
                ("random-etdb-p", Some(m)) => {
                    let p = reflection_parity(m);
                    let pair = rng.random_etdb_p(m, &p);
                    parity = Some(p);
                    (Some(pair), vec!["etdb-p"], true)
                }
                _ => bail!("unknown example {example:?}"),
            };
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        if let Some((ch, rho)) = &pair {
            write(
                &out.join("channel.json"),
                &schema::to_json(&ChannelDoc::from_channel(ch)),
            )?;
            write(
                &out.join("state.json"),
                &schema::to_json(&StateDoc {
                    rho: rho.matrix().clone(),
                }),
            )?;
            files.push(("channel", "channel.json"));
            files.push(("state", "state.json"));
        }
        if let Some(p) = &parity {
            write(
                &out.join("parity.json"),
                &schema::to_json(&OperatorDoc::from_parity(p)),
            )?;
            files.push(("parity", "parity.json"));
        }
        if let Some(mc) = &chain {
            write(
                &out.join("chain.json"),
                &schema::to_json(&ChainDoc::from_chain(mc)),
            )?;
            files.push(("chain", "chain.json"));
        }
        let manifest = Manifest {
            example: example.to_string(),
            seed: seeded.then_some(self.seed),
            files: files
                .iter()
                .map(|(k, f)| (k.to_string(), f.to_string()))
                .collect(),
            checks: checks.iter().map(|c| c.to_string()).collect(),
        };
        let json = schema::to_json(&manifest);
        write(&out.join("manifest.json"), &json)?;
        let mut text = format!("wrote {example} to {}\n", out.display());
        for (_, f) in &files {
            text.push_str(&format!("  {f}\n"));
        }
        text.push_str(&format!(
            "  manifest.json (checks: {})\n",
            manifest.checks.join(", ")
        ));
        self.emit(text, json);
        Ok(0)
    }

    fn embed(&self, chain: &Path, output: Option<&Path>, state_out: Option<&Path>) -> Result<u8> {
        let (mc, _) = load_chain(chain)?;
        let json = schema::to_json(&ChannelDoc::from_channel(&embed(&mc)?));
        if let Some(path) = state_out {
            let rho = CMatrix::diag_real(mc.rho());
            write(path, &schema::to_json(&StateDoc { rho }))?;
        }
        self.artifact(json, output)
    }

    fn reverse(&self, chain: &Path, output: Option<&Path>) -> Result<u8> {
        let (mc, _) = load_chain(chain)?;
        let json = schema::to_json(&ChainDoc::from_chain(&reverse_chain(&mc)?));
        self.artifact(json, output)
    }

    fn artifact(&self, json: String, output: Option<&Path>) -> Result<u8> {
        match output {
            Some(path) => {
                write(path, &json)?;
                if self.format == Format::Text {
                    out(&format!("wrote {}\n", path.display()));
                } else {
                    out(&format!("{json}\n"));
                }
            }
            None => out(&format!("{json}\n")),
        }
        Ok(0)
    }
}

/// Contents of `manifest.json` written by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub example: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub files: std::collections::BTreeMap<String, String>,
    /// Checks the generated instance is expected to pass.
    pub checks: Vec<String>,
}

fn kind_name(kind: CheckKind) -> &'static str {
    match kind {
        CheckKind::Etdb => "etdb",
        CheckKind::Sqdb => "sqdb",
        CheckKind::EtdbP => "etdb-p",
        CheckKind::SqdbTheta => "sqdb-theta",
        CheckKind::Classical => "classical",
        CheckKind::ClassicalP => "classical-p",
    }
}

fn dual_name(kind: DualKind) -> &'static str {
    match kind {
        DualKind::Prime => "prime",
        DualKind::Ac => "ac",
        DualKind::Kms => "kms",
        DualKind::Parity => "parity",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_errors_map_to_not_evaluable() {
        let e = anyhow::Error::new(Error::NonInvertibleSigma { eigenvalue: 0.0 });
        assert_eq!(exit_code_for(&e), 2);
        let e = anyhow::Error::new(Error::InvalidInput("x".into())).context("in file");
        assert_eq!(exit_code_for(&e), 3);
        assert_eq!(exit_code_for(&anyhow!("plain")), 3);
    }
}
