//! Command-line front end: loads scenario files, runs the library
//! operations, prints exact tables and optionally writes machine-readable
//! JSON documents.
//!
//! Exit codes: 0 success (and true verdicts), 1 mathematical failure,
//! 2 malformed input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parpush::error::{Error, Result};
use parpush::gen::{self, InstanceConfig};
use parpush::hurwitz::CoveringMonodromy;
use parpush::oracle::{oracle_filtration_dims, oracle_pushforward, LaurentModel};
use parpush::parabolic::{ohtsuki_check, ParabolicBundle, ResidueData};
use parpush::pushforward::UpstairsBundle;
use parpush::rational::Rational;
use parpush::scenario::{
    self, to_json, OracleCheckDoc, OracleDoc, PardegDoc, RoundtripDoc, Scenario, SelftestDoc,
    ValidateDoc, FORMAT_VERSION,
};
use parpush::torus::{
    induce_connection, reconstruct, torus_from_direct_image, verify_roundtrip_connection,
    verify_roundtrip_covering,
};

#[derive(Parser)]
#[command(name = "parpush", version, about = "Direct images of parabolic bundles, exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a covering: surface-group relation, component genera.
    Validate(FileArgs),
    /// Push a bundle (and residues) through its covering.
    DirectImage(DirectImageArgs),
    /// Parabolic degree of the downstairs bundle, or of the direct image.
    Pardeg(FileArgs),
    /// The canonical torus datum of a direct image.
    Torus(FileArgs),
    /// Rebuild covering and bundle upstairs from bundle + torus datum.
    Reconstruct(FileArgs),
    /// Round-trip checks through push-forward and reconstruction.
    Roundtrip(FileArgs),
    /// Compare the direct image against the Laurent-series local model.
    Oracle(OracleArgs),
    /// Randomized property sweeps.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct FileArgs {
    /// Scenario file (JSON).
    file: Option<PathBuf>,
    /// Process every .json file in a directory instead.
    #[arg(long, value_name = "DIR", conflicts_with = "file")]
    all: Option<PathBuf>,
    /// Write the machine-readable result here.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DirectImageArgs {
    #[command(flatten)]
    common: FileArgs,
    /// Keep marked points whose induced flag is trivial.
    #[arg(long)]
    keep_trivial: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: FileArgs,
    /// Truncation order of the local series models.
    #[arg(long, default_value_t = parpush::oracle::DEFAULT_PRECISION)]
    precision: i64,
}

#[derive(Args)]
struct SelftestArgs {
    /// Seed of the deterministic instance stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances per sweep.
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate(args) => on_files(&args, &cmd_validate),
        Command::DirectImage(args) => {
            on_files(&args.common, &|s| cmd_direct_image(s, args.keep_trivial))
        }
        Command::Pardeg(args) => on_files(&args, &cmd_pardeg),
        Command::Torus(args) => on_files(&args, &cmd_torus),
        Command::Reconstruct(args) => on_files(&args, &cmd_reconstruct),
        Command::Roundtrip(args) => on_files(&args, &cmd_roundtrip),
        Command::Oracle(args) => on_files(&args.common, &|s| cmd_oracle(s, args.precision)),
        Command::Selftest(args) => run_selftest(&args),
    };
    ExitCode::from(code)
}

/// What one command produced: human text, machine document, verdict.
struct Output {
    human: String,
    machine: String,
    pass: bool,
}

fn on_files(args: &FileArgs, run: &dyn Fn(&Scenario) -> Result<Output>) -> u8 {
    match (&args.file, &args.all) {
        (Some(file), None) => run_one(file, args.out.as_deref(), run),
        (None, Some(dir)) => {
            if args.out.is_some() {
                eprintln!("error[ParseError]: --out is not supported with --all");
                return 2;
            }
            let mut entries: Vec<PathBuf> = match std::fs::read_dir(dir) {
                Ok(read) => read
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .collect(),
                Err(e) => {
                    eprintln!("error[ParseError]: cannot read {}: {e}", dir.display());
                    return 2;
                }
            };
            entries.sort();
            let mut worst = 0u8;
            for path in entries {
                println!("== {}", path.display());
                worst = worst.max(run_one(&path, None, run));
            }
            worst
        }
        _ => {
            eprintln!("error[ParseError]: give a scenario file or --all <dir>");
            2
        }
    }
}

fn run_one(path: &Path, out: Option<&Path>, run: &dyn Fn(&Scenario) -> Result<Output>) -> u8 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error[ParseError]: cannot read {}: {e}", path.display());
            return 2;
        }
    };
    let scenario = match Scenario::from_json(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            return 2;
        }
    };
    match run(&scenario) {
        Ok(output) => {
            print!("{}", output.human);
            if let Some(out_path) = out {
                if let Err(e) = std::fs::write(out_path, &output.machine) {
                    eprintln!("error[ParseError]: cannot write {}: {e}", out_path.display());
                    return 2;
                }
            }
            u8::from(!output.pass)
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            match e {
                Error::Parse(_) => 2,
                _ => 1,
            }
        }
    }
}

fn need_covering(s: &Scenario) -> Result<&CoveringMonodromy> {
    s.covering
        .as_ref()
        .ok_or_else(|| Error::Parse("this command needs a covering section".into()))
}

fn need_upstairs(s: &Scenario) -> Result<&UpstairsBundle> {
    s.upstairs
        .as_ref()
        .ok_or_else(|| Error::Parse("this command needs an upstairs section".into()))
}

fn bundle_table(bundle: &ParabolicBundle) -> String {
    let mut out = String::new();
    for (i, comp) in bundle.components().iter().enumerate() {
        if bundle.components().len() > 1 {
            let _ = writeln!(out, "  component {i}: rank {} degree {}", comp.rank, comp.degree);
        } else {
            let _ = writeln!(out, "  rank {} degree {}", comp.rank, comp.degree);
        }
    }
    let _ = writeln!(out, "  par-deg {}", bundle.par_deg());
    for fp in bundle.flags() {
        let _ = writeln!(out, "  flag {}: {}", fp.label, fp.flag);
    }
    out
}

fn residue_table(residues: &ResidueData) -> String {
    let mut out = String::new();
    for entry in residues.entries() {
        let evs: Vec<String> = entry.eigenvalues.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(out, "  residues {}: [{}]", entry.label, evs.join(", "));
    }
    out
}

fn covering_table(covering: &CoveringMonodromy) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "  degree {} over genus-{} base with {} marked points",
        covering.degree(),
        covering.base().genus(),
        covering.base().marked_points().len()
    );
    for label in covering.base().marked_points() {
        let _ = writeln!(out, "  branch {}: {}", label, covering.branch_perm(label)?);
    }
    for (i, comp) in covering.components()?.iter().enumerate() {
        let sheets: Vec<String> = comp.sheets.iter().map(|s| (s + 1).to_string()).collect();
        let _ = writeln!(
            out,
            "  component {i}: sheets {{{}}} degree {} genus {}",
            sheets.join(","),
            comp.local_degree(),
            comp.genus
        );
    }
    Ok(out)
}

fn cmd_validate(s: &Scenario) -> Result<Output> {
    let covering = need_covering(s)?;
    let report = covering.validate();
    let mut human = String::new();
    let mut components = Vec::new();
    if report.is_valid() {
        let _ = writeln!(human, "valid covering");
        let _ = write!(human, "{}", covering_table(covering)?);
        components = covering
            .components()?
            .iter()
            .map(|c| scenario::ComponentDoc {
                sheets: c.sheets.iter().map(|s| s + 1).collect(),
                local_degree: c.local_degree(),
                genus: c.genus,
            })
            .collect();
    } else {
        let _ = writeln!(human, "invalid covering:");
        for v in &report.violations {
            let _ = writeln!(human, "  {v}");
        }
    }
    let doc = ValidateDoc {
        version: FORMAT_VERSION.to_string(),
        valid: report.is_valid(),
        violations: report.violations.clone(),
        components,
    };
    Ok(Output { human, machine: to_json(&doc), pass: report.is_valid() })
}

fn cmd_direct_image(s: &Scenario, keep_trivial: bool) -> Result<Output> {
    let upstairs = need_upstairs(s)?;
    let empty = ResidueData::empty();
    let residues = s.residues.as_ref().unwrap_or(&empty);
    let pushed = upstairs.push_forward_with(keep_trivial)?;
    let pushed_residues = upstairs.push_forward_residues(residues)?;

    let mut human = String::from("direct image:\n");
    human.push_str(&bundle_table(&pushed));
    human.push_str(&residue_table(&pushed_residues));

    let out = Scenario {
        base: Some(upstairs.covering().base().clone()),
        downstairs: Some(pushed),
        residues: Some(pushed_residues),
        ..Scenario::default()
    };
    Ok(Output { human, machine: out.to_json(), pass: true })
}

fn cmd_pardeg(s: &Scenario) -> Result<Output> {
    let value = if let Some(bundle) = &s.downstairs {
        bundle.par_deg()
    } else if let Some(upstairs) = &s.upstairs {
        upstairs.push_forward()?.par_deg()
    } else {
        return Err(Error::Parse("this command needs a downstairs or upstairs section".into()));
    };
    let doc = PardegDoc { version: FORMAT_VERSION.to_string(), pardeg: value.clone() };
    Ok(Output { human: format!("{value}\n"), machine: to_json(&doc), pass: true })
}

fn cmd_torus(s: &Scenario) -> Result<Output> {
    let upstairs = need_upstairs(s)?;
    let torus = torus_from_direct_image(upstairs);
    let ranks: Vec<String> = torus.block_ranks().iter().map(|r| r.to_string()).collect();
    let mut human = String::from("torus datum of the direct image:\n");
    let _ = writeln!(human, "  block ranks [{}]", ranks.join(","));
    for (label, perm) in torus.branch() {
        let _ = writeln!(human, "  branch {label}: {perm}");
    }
    let out = Scenario {
        base: Some(upstairs.covering().base().clone()),
        torus: Some(torus),
        ..Scenario::default()
    };
    Ok(Output { human, machine: out.to_json(), pass: true })
}

fn cmd_reconstruct(s: &Scenario) -> Result<Output> {
    let base = s
        .base
        .as_ref()
        .ok_or_else(|| Error::Parse("this command needs a base section".into()))?;
    let bundle = s
        .downstairs
        .as_ref()
        .ok_or_else(|| Error::Parse("this command needs a downstairs section".into()))?;
    let torus = s
        .torus
        .as_ref()
        .ok_or_else(|| Error::Parse("this command needs a torus section".into()))?;
    let rec = reconstruct(base, bundle, torus)?;

    let mut human = String::from("reconstructed covering:\n");
    human.push_str(&covering_table(&rec.covering)?);
    human.push_str("reconstructed bundle upstairs:\n");
    human.push_str(&bundle_table(rec.upstairs.bundle()));
    if rec.ambiguous {
        human.push_str("note: several assignments exist; the canonical one was chosen\n");
    }

    let induced = match &s.residues {
        Some(residues) => {
            let induced = induce_connection(bundle, residues, &rec)?;
            human.push_str("induced residues upstairs:\n");
            human.push_str(&residue_table(&induced));
            Some(induced)
        }
        None => None,
    };

    let out = Scenario {
        base: Some(base.clone()),
        covering: Some(rec.covering.clone()),
        upstairs: Some(rec.upstairs.clone()),
        residues: induced,
        ..Scenario::default()
    };
    Ok(Output { human, machine: out.to_json(), pass: true })
}

fn cmd_roundtrip(s: &Scenario) -> Result<Output> {
    let upstairs = need_upstairs(s)?;
    let covering_ok = verify_roundtrip_covering(upstairs)?;
    let connection_ok = match &s.residues {
        Some(residues) => Some(verify_roundtrip_connection(upstairs, residues)?),
        None => None,
    };
    let mut human =
        format!("covering roundtrip: {}\n", if covering_ok { "ok" } else { "FAILED" });
    if let Some(ok) = connection_ok {
        let _ = writeln!(human, "connection roundtrip: {}", if ok { "ok" } else { "FAILED" });
    }
    let pass = covering_ok && connection_ok.unwrap_or(true);
    let doc = RoundtripDoc {
        version: FORMAT_VERSION.to_string(),
        covering_roundtrip: covering_ok,
        connection_roundtrip: connection_ok,
    };
    Ok(Output { human, machine: to_json(&doc), pass })
}

fn cmd_oracle(s: &Scenario, precision: i64) -> Result<Output> {
    let upstairs = need_upstairs(s)?;
    let empty = ResidueData::empty();
    let residues = s.residues.as_ref().unwrap_or(&empty);
    upstairs.validate_residues(residues)?;

    let mut checks = Vec::new();
    let mut human = String::from("oracle comparison (per fiber point):\n");
    for label in upstairs.covering().base().marked_points() {
        for cycle in upstairs.cycle_pieces(label, Some(residues))? {
            let point_label = cycle.point.label();
            let flag = upstairs.bundle().effective_flag(&point_label, cycle.point.component);
            let b = cycle.multiplicity;

            // weight law against the monomial-count filtration
            let levels = oracle_filtration_dims(flag.rank(), b, &flag)?;
            let weights_match = levels.iter().all(|level| {
                let got: Vec<(usize, Rational)> = cycle
                    .pieces
                    .iter()
                    .filter(|p| p.level == level.level)
                    .map(|p| (p.dim, p.weight.clone()))
                    .collect();
                got == level.steps
            });

            // residue law against the symbolic local model
            let eigen =
                residues.eigenvalues_for(upstairs.bundle(), &point_label, cycle.point.component);
            let per_slot: Vec<Rational> = flag
                .steps()
                .iter()
                .zip(&eigen)
                .flat_map(|(step, ev)| std::iter::repeat_n(ev.clone(), step.dim))
                .collect();
            let model = LaurentModel::diagonal(&per_slot, precision);
            let pushed_model = oracle_pushforward(&model, b)?;
            let spectrum: Vec<Rational> = cycle
                .pieces
                .iter()
                .flat_map(|p| {
                    std::iter::repeat_n(p.eigenvalue.clone().expect("residues supplied"), p.dim)
                })
                .collect();
            let residues_match = pushed_model.spectrum_matches(&spectrum);

            let _ = writeln!(
                human,
                "  {point_label} (b={b}): weights {}, residues {}",
                if weights_match { "ok" } else { "MISMATCH" },
                if residues_match { "ok" } else { "MISMATCH" },
            );
            checks.push(OracleCheckDoc {
                point: point_label,
                multiplicity: b,
                weights_match,
                residues_match: Some(residues_match),
            });
        }
    }
    let all_match = checks.iter().all(|c| c.weights_match && c.residues_match == Some(true));
    let _ = writeln!(human, "all checks: {}", if all_match { "ok" } else { "MISMATCH" });
    let doc = OracleDoc { version: FORMAT_VERSION.to_string(), checks, all_match };
    Ok(Output { human, machine: to_json(&doc), pass: all_match })
}

fn run_selftest(args: &SelftestArgs) -> u8 {
    match selftest(args.seed, args.count) {
        Ok(output) => {
            print!("{}", output.human);
            if let Some(path) = &args.out {
                if let Err(e) = std::fs::write(path, &output.machine) {
                    eprintln!("error[ParseError]: cannot write {}: {e}", path.display());
                    return 2;
                }
            }
            u8::from(!output.pass)
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            1
        }
    }
}

fn selftest(seed: u64, count: usize) -> Result<Output> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut human = String::new();
    let mut checks = Vec::new();
    let mut failures = 0usize;
    let record = |human: &mut String, checks: &mut Vec<String>, name: &str, failed: usize| {
        let verdict = if failed == 0 { "ok" } else { "FAILED" };
        let _ = writeln!(human, "{name}: {verdict}");
        checks.push(format!("{name}: {verdict}"));
        failed
    };

    let cfg = InstanceConfig::pushforward_grid();
    let mut failed = 0;
    for _ in 0..count {
        let (u, r) = gen::random_parabolic_instance(&mut rng, &cfg, false);
        if !u.verify_parabolicity(&r)? {
            failed += 1;
        }
        if u.push_forward()?.par_deg() != u.bundle().par_deg() {
            failed += 1;
        }
    }
    failures += record(
        &mut human,
        &mut checks,
        "pushed connections stay parabolic; par-deg conserved",
        failed,
    );

    let mut failed = 0;
    for _ in 0..count {
        let u = gen::random_upstairs(&mut rng, &cfg, false);
        let r = gen::ohtsuki_exact_residues(&mut rng, &u);
        if !ohtsuki_check(u.bundle(), &r)? {
            failed += 1;
            continue;
        }
        match u.push_forward_residues(&r) {
            Ok(down) => {
                if !ohtsuki_check(&u.push_forward()?, &down)? {
                    failed += 1;
                }
            }
            Err(Error::MergeConflict(_)) => {} // non-scalar merge, outside the model
            Err(e) => return Err(e),
        }
    }
    failures += record(&mut human, &mut checks, "trace identity descends", failed);

    let cfg = InstanceConfig::roundtrip_grid();
    let mut failed = 0;
    for _ in 0..count {
        let (u, r) = gen::random_parabolic_instance(&mut rng, &cfg, false);
        if !verify_roundtrip_covering(&u)? {
            failed += 1;
        }
        if !verify_roundtrip_connection(&u, &r)? {
            failed += 1;
        }
    }
    failures += record(&mut human, &mut checks, "covering and connection roundtrips", failed);

    let pass = failures == 0;
    let _ = writeln!(human, "selftest: {}", if pass { "ok" } else { "FAILED" });
    let doc =
        SelftestDoc { version: FORMAT_VERSION.to_string(), seed, instances: count, failures, checks };
    Ok(Output { human, machine: to_json(&doc), pass })
}
