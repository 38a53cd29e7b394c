use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use qwk_core::capacity::{self, CapacityReport, SolverConfig};
use qwk_core::channels::{build_tau_net, CompoundWiretapSpec};
use qwk_core::entgen::{audit, build_decoder_unitaries, build_entgen_code, phase_align};
use qwk_core::infotheory::check_distribution;
use qwk_core::qcore::identity;
use qwk_core::schema::{parse_family, parse_spec, Family};
use qwk_core::verify::{run_suite, SuiteReport, SUITES};
use qwk_core::wiretapsim::{simulate, two_part_protocol, DecoderOptions, ProtocolConfig, SimConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{CapacityArgs, Command, EntangleArgs, NetArgs, OutputArgs, SimulateArgs, VerifyArgs};
use crate::output::{num, read_text, to_canonical, Table};
use crate::CliError;

/// Everything a command produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub spec: Option<String>,
    pub overrides: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub report: Value,
    /// One line for the terminal when the report goes to a file.
    pub summary: String,
    pub table: Option<Table>,
    /// Printed to stdout in place of the JSON document.
    pub text: Option<String>,
    /// Set when the command ran but its checks failed.
    pub failed: Option<String>,
}

impl Outcome {
    fn new<T: Serialize>(command: &'static str, report: &T, summary: String) -> Self {
        Self {
            command,
            spec: None,
            overrides: BTreeMap::new(),
            seed: None,
            report: to_canonical(report),
            summary,
            table: None,
            text: None,
            failed: None,
        }
    }

    fn config<T: Serialize>(mut self, cfg: &T) -> Self {
        if let Value::Object(m) = serde_json::to_value(cfg).expect("config serialises") {
            self.overrides.extend(m);
        }
        self
    }
}

pub fn output_args(cmd: &Command) -> OutputArgs {
    match cmd {
        Command::Capacity(a) => a.output.clone(),
        Command::Simulate(a) => a.output.clone(),
        Command::Entangle(a) => a.output.clone(),
        Command::Verify(a) => a.output.clone(),
        Command::Net(a) => OutputArgs { out: a.out.clone(), csv: None },
        Command::Rerun(a) => OutputArgs { out: a.out.clone(), csv: None },
    }
}

pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Capacity(a) => cmd_capacity(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Net(a) => cmd_net(a),
        Command::Entangle(a) => cmd_entangle(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Rerun(_) => Err(CliError::Usage("rerun cannot be nested".into())),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn parse_floats(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{flag}: `{x}` is not a number"))))
        .collect()
}

fn parse_counts(flag: &str, s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("{flag}: `{x}` is not a count"))))
        .collect()
}

fn parse_prior(s: Option<&str>) -> Result<Option<Vec<f64>>, CliError> {
    let Some(s) = s else { return Ok(None) };
    let p = parse_floats("--prior", s)?;
    check_distribution(&p).map_err(|e| CliError::Usage(format!("--prior: {e}")))?;
    Ok(Some(p))
}

fn is_auto(s: &Option<String>) -> bool {
    s.as_deref().is_none_or(|v| v.eq_ignore_ascii_case("auto"))
}

// ---------------------------------------------------------------------------
// capacity

/// Short names accepted by `--formula`.
pub const FORMULAS: [(&str, &str); 8] = [
    ("b1", "classical_csi"),
    ("b1p", "classical_nocsi_lower"),
    ("csi", "qwiretap_csi"),
    ("nocsi", "qwiretap_nocsi_lower"),
    ("e1q", "cq_csi"),
    ("qnocsi", "cq_nocsi"),
    ("ent", "entgen_lower"),
    ("ent_csi", "entgen_csi"),
];

pub fn formula_id(name: &str) -> Result<&'static str, CliError> {
    FORMULAS
        .iter()
        .find(|(alias, id)| *alias == name || *id == name)
        .map(|(_, id)| *id)
        .ok_or_else(|| {
            let known: Vec<String> = FORMULAS.iter().map(|(a, i)| format!("{a} ({i})")).collect();
            CliError::Usage(format!("unknown formula `{name}`; expected one of {}", known.join(", ")))
        })
}

fn capacity_table(r: &CapacityReport) -> Table {
    let mut t = Table::new(&["t", "legit", "wiretap", "value"]);
    for p in &r.per_t {
        t.push(vec![p.t.clone(), num(p.legit), num(p.wiretap), num(p.value)]);
    }
    t
}

/// Family reports index states by position; put the file's names back.
fn relabel(r: &mut CapacityReport, names: &[String]) {
    let rename = |t: &str| t.strip_prefix('t').and_then(|i| i.parse::<usize>().ok()).and_then(|i| names.get(i)).cloned();
    for p in &mut r.per_t {
        if let Some(n) = rename(&p.t) {
            p.t = n;
        }
    }
    if let Some(n) = r.argmin_t.as_deref().and_then(rename) {
        r.argmin_t = Some(n);
    }
}

fn cmd_capacity(a: &CapacityArgs) -> Result<Outcome, CliError> {
    let id = formula_id(&a.formula)?;
    let cfg = SolverConfig {
        n: a.n,
        aux_card: a.aux_card,
        grid_resolution: a.grid,
        refine_iters: a.refine,
        restarts: a.restarts,
        seed: a.seed,
        tolerance: a.tolerance,
    };
    let text = read_text(&a.spec)?;
    let report = match id {
        "entgen_lower" | "entgen_csi" => {
            let fam = parse_family(&text)?;
            let mut r = if id == "entgen_lower" {
                capacity::entgen_lower_bound(&fam.members, &cfg)?
            } else {
                capacity::entgen_csi_capacity(&fam.members, &cfg)?
            };
            relabel(&mut r, &fam.names);
            r
        }
        _ => {
            let spec = parse_spec(&text)?;
            let f: fn(&CompoundWiretapSpec, &SolverConfig) -> qwk_core::Result<CapacityReport> = match id {
                "classical_csi" => capacity::classical_csi_capacity,
                "classical_nocsi_lower" => capacity::classical_nocsi_lower,
                "qwiretap_csi" => capacity::qwiretap_csi_capacity,
                "qwiretap_nocsi_lower" => capacity::qwiretap_nocsi_lower,
                "cq_csi" => capacity::cq_csi_capacity,
                _ => capacity::cq_nocsi_capacity,
            };
            f(&spec, &cfg)?
        }
    };
    let mut o = Outcome::new("capacity", &report, format!("{} = {}", report.formula_id, num(report.value)))
        .config(&cfg);
    o.overrides.insert("formula".into(), json!(id));
    o.spec = Some(path_str(&a.spec));
    o.seed = Some(a.seed);
    o.table = Some(capacity_table(&report));
    Ok(o)
}

// ---------------------------------------------------------------------------
// simulate

fn state_index(spec: &CompoundWiretapSpec, s: &str) -> Result<usize, CliError> {
    if let Some(i) = spec.pairs().iter().position(|p| p.name == s) {
        return Ok(i);
    }
    match s.parse::<usize>() {
        Ok(i) if i < spec.len() => Ok(i),
        _ => Err(CliError::Usage(format!("--t-true: no channel state `{s}`"))),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let spec = parse_spec(&read_text(&a.spec)?)?;
    let prior = parse_prior(a.prior.as_deref())?;
    let decoder = DecoderOptions { delta: a.decoder_delta, sandwich: !a.no_sandwich, ..Default::default() };
    let messages = if is_auto(&a.messages) {
        None
    } else {
        let j = parse_counts("--J", a.messages.as_deref().expect("set"))?;
        if j.len() != 1 {
            return Err(CliError::Usage("--J takes a single count".into()));
        }
        Some(j[0])
    };
    let depth = if is_auto(&a.depth) { None } else { Some(parse_counts("--L", a.depth.as_deref().expect("set"))?) };

    let mut o = if a.protocol {
        let t = a.t_true.as_deref().ok_or_else(|| CliError::Usage("--protocol needs --t-true".into()))?;
        let t_true = state_index(&spec, t)?;
        let cfg = ProtocolConfig {
            n1: a.n1,
            n2: a.n2,
            messages: messages.unwrap_or(ProtocolConfig::default().messages),
            depth: depth.unwrap_or_else(|| vec![1]),
            trials: a.trials,
            seed: a.seed,
            prior,
            delta: a.delta,
            decoder,
        };
        let r = two_part_protocol(&spec, t_true, &cfg)?;
        let mc = r.monte_carlo;
        let summary = format!(
            "protocol t={}: total error {}, leakage {}",
            r.t_true,
            num(mc.total_error),
            num(r.leakage.value)
        );
        let mut table = Table::new(&["t_true", "method", "block1_error", "block2_error", "total_error", "leakage"]);
        let mut row = |m: &str, b: &qwk_core::wiretapsim::BlockRates| {
            table.push(vec![
                r.t_true.clone(),
                m.into(),
                num(b.block1_error),
                num(b.block2_error),
                num(b.total_error),
                num(r.leakage.value),
            ])
        };
        if let Some(e) = &r.exact {
            row("exact", e);
        }
        row("monte_carlo", &mc);
        let mut o = Outcome::new("simulate", &r, summary).config(&cfg);
        o.overrides.insert("protocol".into(), json!(true));
        o.overrides.insert("t_true".into(), json!(t_true));
        o.table = Some(table);
        o
    } else {
        let cfg = SimConfig {
            n: a.n,
            messages,
            depth,
            trials: a.trials,
            seed: a.seed,
            prior,
            delta: a.delta,
            decoder,
            mu: a.mu,
            zeta: a.zeta,
        };
        let r = simulate(&spec, &cfg)?;
        let summary = format!(
            "J={} L={:?}: max error {}, max leakage {}",
            r.messages,
            r.depth,
            num(r.max_error),
            num(r.max_leakage)
        );
        let mut table = Table::new(&["t", "error", "std_err", "method", "leakage", "leakage_cap"]);
        for s in &r.per_t {
            let se = s.error.std_err.get(s.error.worst_message).copied().unwrap_or(0.0);
            let method = serde_json::to_value(s.error.method).expect("method");
            table.push(vec![
                s.t.clone(),
                num(s.error.value),
                num(se),
                method.as_str().unwrap_or_default().to_string(),
                num(s.leakage.value),
                num(s.leakage.cap),
            ]);
        }
        let mut o = Outcome::new("simulate", &r, summary).config(&cfg);
        o.table = Some(table);
        o
    };
    o.spec = Some(path_str(&a.spec));
    o.seed = Some(a.seed);
    Ok(o)
}

// ---------------------------------------------------------------------------
// net

fn cmd_net(a: &NetArgs) -> Result<Outcome, CliError> {
    let net = build_tau_net(a.d_in, a.d_out, a.tau, a.budget)?;
    let expr = format!("{}^{}", num(net.bound_base), net.bound_exponent);
    let report = json!({
        "tau": net.tau,
        "d_in": net.d_in,
        "d_out": net.d_out,
        "elements": net.len(),
        "truncated": net.truncated,
        "lattice_step": net.lattice_step,
        "bound_base": net.bound_base,
        "bound_exponent": net.bound_exponent,
        "bound_log10": net.bound_log10(),
        "bound": net.bound(),
        "bound_expr": expr,
    });
    let summary = format!(
        "{} elements{}; cardinality bound {} = {:.6e}",
        net.len(),
        if net.truncated { " (budget reached)" } else { "" },
        expr,
        net.bound()
    );
    let mut o = Outcome::new("net", &report, summary);
    o.overrides = BTreeMap::from([
        ("d_in".to_string(), json!(a.d_in)),
        ("d_out".to_string(), json!(a.d_out)),
        ("tau".to_string(), json!(a.tau)),
        ("budget".to_string(), json!(a.budget)),
    ]);
    Ok(o)
}

// ---------------------------------------------------------------------------
// entangle

fn cmd_entangle(a: &EntangleArgs) -> Result<Outcome, CliError> {
    let Family { names, members, prior: file_prior, basis } = parse_family(&read_text(&a.family)?)?;
    let d = members[0].d_in();
    let prior = match parse_prior(a.prior.as_deref())? {
        Some(p) => p,
        None => file_prior.unwrap_or_else(|| vec![1.0 / d as f64; d]),
    };
    let basis = basis.unwrap_or_else(|| identity(d));
    let code = build_entgen_code(&members, &prior, &basis, a.n, a.messages, a.depth, a.delta, a.seed)?;
    let code = phase_align(&code, &members)?;
    let code = build_decoder_unitaries(&code, &members)?;
    let mut r = audit(&code, &members)?;
    for (run, name) in r.per_t.iter_mut().zip(&names) {
        run.t = name.clone();
    }
    let summary = format!(
        "min fidelity {}, bound {} ({})",
        num(r.min_fidelity),
        num(r.bound),
        if r.bound_holds { "holds" } else { "violated" }
    );
    let mut table = Table::new(&["t", "fidelity", "actual_vs_ideal", "ideal_vs_target", "actual_vs_target", "bound"]);
    for p in &r.per_t {
        table.push(vec![
            p.t.clone(),
            num(p.fidelity),
            num(p.actual_vs_ideal),
            num(p.ideal_vs_target),
            num(p.actual_vs_target),
            num(r.bound),
        ]);
    }
    let mut o = Outcome::new("entangle", &r, summary);
    o.overrides = BTreeMap::from([
        ("n".to_string(), json!(a.n)),
        ("messages".to_string(), json!(a.messages)),
        ("depth".to_string(), json!(a.depth)),
        ("delta".to_string(), json!(a.delta)),
        ("prior".to_string(), json!(prior)),
    ]);
    o.spec = Some(path_str(&a.family));
    o.seed = Some(a.seed);
    o.table = Some(table);
    Ok(o)
}

// ---------------------------------------------------------------------------
// verify

pub fn verify_table(reports: &[SuiteReport]) -> String {
    let mut s = format!("{:<12} {:<22} {:>8} {:>10}  result\n", "suite", "bound", "checks", "violations");
    for r in reports {
        for t in &r.tally {
            let verdict = if t.violations == 0 { "pass" } else { "FAIL" };
            let _ = writeln!(s, "{:<12} {:<22} {:>8} {:>10}  {verdict}", r.suite, t.bound_id, t.checks, t.violations);
        }
    }
    let checks: usize = reports.iter().map(|r| r.checks).sum();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let _ = writeln!(s, "total: {checks} checks, {violations} violations");
    s
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let ids: Vec<&str> = if a.suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&a.suite.as_str()) {
        vec![a.suite.as_str()]
    } else {
        return Err(CliError::Usage(format!("unknown suite `{}`; expected all or one of {}", a.suite, SUITES.join(", "))));
    };
    let reports = ids.iter().map(|id| run_suite(id, a.seed)).collect::<qwk_core::Result<Vec<_>>>()?;
    let checks: usize = reports.iter().map(|r| r.checks).sum();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let report = json!({ "suites": reports, "checks": checks, "violations": violations, "pass": violations == 0 });
    let mut table = Table::new(&["suite", "bound_id", "checks", "violations"]);
    for r in &reports {
        for t in &r.tally {
            table.push(vec![r.suite.clone(), t.bound_id.clone(), t.checks.to_string(), t.violations.to_string()]);
        }
    }
    let mut o = Outcome::new("verify", &report, format!("{checks} checks, {violations} violations"));
    o.overrides.insert("suite".into(), json!(a.suite));
    o.seed = Some(a.seed);
    o.table = Some(table);
    o.text = Some(verify_table(&reports));
    if violations > 0 {
        o.failed = Some(format!("{violations} bound violations"));
    }
    Ok(o)
}
