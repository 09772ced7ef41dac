use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lexrl::alphabet::Alphabet;
use lexrl::automata::{parse_ltl, print_hoa, safety_to_automaton};
use lexrl::learn::{
    action_sets, evaluate, greedy_policy, product_fingerprint, Checkpoint, EvalOptions, EvalStats,
    Params, StatsCsv, Trainer,
};
use lexrl::oracle::{
    analyze, exact_policy_value, max_qoc_return, Objective, OracleReport, OracleResult,
};
use lexrl::product::ProductMdp;
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Built, Resolved};
use crate::render::{self, PolicyExport};

pub const CHECKPOINT: &str = "checkpoint.json";
pub const STATS: &str = "stats.csv";
pub const POLICY: &str = "policy.json";
pub const EVAL: &str = "eval.json";
pub const MANIFEST: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::write(dir.join(name), bytes)
        .with_context(|| format!("writing {}", dir.join(name).display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    /// The resolved config with inputs inlined; rerunning it reproduces
    /// every artifact.
    pub config: String,
    pub seed: u64,
    pub episodes: usize,
    pub horizon: usize,
    pub product_states: usize,
    pub product_fingerprint: String,
    pub versions: Versions,
    /// SHA-256 of each artifact.
    pub artifacts: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub lexrl: String,
    pub lexrl_cli: String,
}

fn versions() -> Versions {
    Versions {
        lexrl: lexrl::VERSION.to_string(),
        lexrl_cli: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Trains, evaluates and writes every artifact of one seed into `dir`.
pub fn run_one(r: &Resolved, b: &Built, seed: u64, dir: &Path) -> Result<EvalStats> {
    let c = &r.config;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = &b.product;
    let mut tr =
        Trainer::new(p, b.hyper.clone(), c.horizon, seed).context("stage hyperparameters")?;
    let mut stats = StatsCsv::new(c.stats_every);
    let mut rows = vec![StatsCsv::HEADER.to_string()];
    tr.train_until(c.episodes, |_, s| {
        if let Some(row) = stats.push(s) {
            info!("seed {seed}: {row}");
            rows.push(row);
        }
    });
    let ck = tr.checkpoint();
    ck.save(&dir.join(CHECKPOINT))
        .context("writing checkpoint")?;
    let mut artifacts = vec![(
        CHECKPOINT.to_string(),
        sha256_hex(&fs::read(dir.join(CHECKPOINT))?),
    )];
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        artifacts.push((name.to_string(), sha256_hex(&bytes)));
        write(dir, name, &bytes)
    };
    emit(STATS, (rows.join("\n") + "\n").into_bytes())?;

    let h = b.hyper.at(tr.episode);
    let pi = greedy_policy(&tr.q, p, &h);
    let export = PolicyExport::new(p, &pi, &tr.q);
    emit(POLICY, serde_json::to_vec_pretty(&export)?)?;

    let start_after = match &c.eval_start_after {
        None => None,
        Some(name) => Some(
            b.mdp
                .state_by_name(name)
                .with_context(|| format!("unknown state {name:?}"))?,
        ),
    };
    let opts = EvalOptions {
        episodes: c.eval_episodes,
        horizon: c.horizon,
        start_after,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e7a1);
    let e = evaluate(p, &pi, &opts, &mut rng);
    emit(EVAL, serde_json::to_vec_pretty(&e)?)?;

    let config = r.canonical()?;
    let m = Manifest {
        config_sha256: sha256_hex(config.as_bytes()),
        config,
        seed,
        episodes: c.episodes,
        horizon: c.horizon,
        product_states: p.num_states(),
        product_fingerprint: ck.fingerprint,
        versions: versions(),
        artifacts,
    };
    write(dir, MANIFEST, &serde_json::to_vec_pretty(&m)?)?;
    Ok(e)
}

/// Runs `runs` seeds starting at the configured one, concurrently. A single
/// run writes into the output directory itself, several into `seed-N`
/// subdirectories.
pub fn run(r: &Resolved, runs: usize) -> Result<Vec<(u64, EvalStats)>> {
    let b = r.build()?;
    let c = &r.config;
    info!(
        "product: {} states ({} full), {} episodes x {} steps",
        b.product.num_states(),
        b.product.full_size(),
        c.episodes,
        c.horizon
    );
    let seeds: Vec<u64> = (0..runs.max(1) as u64).map(|i| c.seed + i).collect();
    let dir = |s: u64| {
        if runs <= 1 {
            c.output.clone()
        } else {
            c.output.join(format!("seed-{s}"))
        }
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&s| {
                (
                    s,
                    scope.spawn({
                        let b = &b;
                        move || run_one(r, b, s, &dir(s))
                    }),
                )
            })
            .collect();
        handles
            .into_iter()
            .map(|(s, h)| {
                Ok((
                    s,
                    h.join()
                        .map_err(|_| anyhow::anyhow!("run for seed {s} panicked"))??,
                ))
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub matching: usize,
    pub total: usize,
    pub fraction: f64,
}

impl Agreement {
    fn new(matching: usize, total: usize) -> Self {
        let fraction = if total == 0 {
            1.0
        } else {
            matching as f64 / total as f64
        };
        Agreement {
            matching,
            total,
            fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub state: String,
    pub visits: u64,
    pub learned_a_psi: Vec<String>,
    pub oracle_a_psi: Vec<String>,
    pub learned_a_psi_phi: Vec<String>,
    pub oracle_a_psi_phi: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub episode: usize,
    pub product_states: usize,
    /// Thresholds and mixing used to read the tables.
    pub params: Params,
    pub min_visits: u64,
    pub a_psi: Agreement,
    pub a_psi_phi: Agreement,
    pub frequent_a_psi: Agreement,
    pub frequent_a_psi_phi: Agreement,
    pub at: String,
    pub greedy_safety: f64,
    pub greedy_buchi: f64,
    pub greedy_return: f64,
    pub optimal_return: f64,
    /// `optimal_return - greedy_return`; reported, not checked.
    pub return_gap: f64,
    pub disagreements: Vec<Disagreement>,
}

/// Compares a checkpoint's tables with the oracle. Reads the checkpoint and
/// nothing else.
pub fn verify(
    p: &ProductMdp,
    ck: &Checkpoint,
    at: Option<&str>,
    min_visits: u64,
) -> Result<VerifyReport> {
    let fp = product_fingerprint(p);
    if ck.fingerprint != fp {
        bail!(
            "checkpoint was trained on another product (fingerprint {}, config gives {fp})",
            ck.fingerprint
        );
    }
    if ck.q.psi.len() != p.num_pairs() || ck.visits.len() != p.num_states() {
        bail!("checkpoint tables do not match the product's dimensions");
    }
    let oracle = analyze(p);
    let h = ck.hyper.at(ck.episode);
    let names = |x: usize, set: &[usize]| -> Vec<String> {
        set.iter()
            .map(|&k| p.action_name(p.actions(x)[k]))
            .collect()
    };
    let (mut psi, mut pp, mut fpsi, mut fpp, mut frequent) = (0, 0, 0, 0, 0);
    let mut disagreements = Vec::new();
    for x in 0..p.num_states() {
        let (a, b) = action_sets(&ck.q, p, x, h.tau_psi, h.tau_phi);
        let (ok_a, ok_b) = (a == oracle.a_psi[x], b == oracle.a_psi_phi[x]);
        psi += ok_a as usize;
        pp += ok_b as usize;
        if ck.visits[x] >= min_visits {
            frequent += 1;
            fpsi += ok_a as usize;
            fpp += ok_b as usize;
        }
        if !(ok_a && ok_b) {
            disagreements.push(Disagreement {
                state: p.state_name(x),
                visits: ck.visits[x],
                learned_a_psi: names(x, &a),
                oracle_a_psi: names(x, &oracle.a_psi[x]),
                learned_a_psi_phi: names(x, &b),
                oracle_a_psi_phi: names(x, &oracle.a_psi_phi[x]),
            });
        }
    }
    let x = match at {
        None => p.initial(),
        Some(name) => (0..p.num_states())
            .find(|&x| p.state_name(x) == name)
            .with_context(|| format!("no product state named {name}"))?,
    };
    let pi = greedy_policy(&ck.q, p, &h);
    let ret = exact_policy_value(p, &pi, Objective::QocReturn)[x];
    let opt = max_qoc_return(p, &oracle.a_psi_phi).v[x];
    let n = p.num_states();
    Ok(VerifyReport {
        episode: ck.episode,
        product_states: n,
        params: h,
        min_visits,
        a_psi: Agreement::new(psi, n),
        a_psi_phi: Agreement::new(pp, n),
        frequent_a_psi: Agreement::new(fpsi, frequent),
        frequent_a_psi_phi: Agreement::new(fpp, frequent),
        at: p.state_name(x),
        greedy_safety: exact_policy_value(p, &pi, Objective::SafetyProb)[x],
        greedy_buchi: exact_policy_value(p, &pi, Objective::BuchiProb)[x],
        greedy_return: ret,
        optimal_return: opt,
        return_gap: opt - ret,
        disagreements,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub product_states: usize,
    pub full_size: usize,
    pub optimal_return: f64,
    pub report: OracleReport,
}

pub fn oracle(p: &ProductMdp) -> OracleOutput {
    let r: OracleResult = analyze(p);
    OracleOutput {
        product_states: p.num_states(),
        full_size: p.full_size(),
        optimal_return: max_qoc_return(p, &r.a_psi_phi).v[p.initial()],
        report: OracleReport::new(p, &r),
    }
}

/// Safety formula to automaton, as a transition table or as HOA.
pub fn translate(formula: &str, props: &[String], hoa: bool) -> Result<String> {
    let ab = Alphabet::new(props.iter().map(String::as_str)).context("propositions")?;
    let f = parse_ltl(formula, &ab)?;
    let a = safety_to_automaton(&f)?;
    if hoa {
        return Ok(print_hoa(&a.to_ldba()));
    }
    let mut out = format!("states {} initial {}\n", a.num_states(), a.initial());
    for q in 0..a.num_states() {
        let edges: Vec<String> = ab
            .letters()
            .map(|l| format!("{}->{}", ab.display_letter(l), a.next(q, l)))
            .collect();
        let tag = if a.is_accepting(q) {
            "safe  "
        } else {
            "reject"
        };
        out += &format!("{q} {tag} {}  [{}]\n", edges.join(" "), a.description(q));
    }
    Ok(out)
}

/// Writes the ASCII, SVG and CSV renders of a policy export next to `out`.
/// Returns the written paths.
pub fn render(export: &PolicyExport, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    if let Some(t) = render::ascii(export) {
        put("policy.txt", t)?;
    }
    if let Some(t) = render::svg(export) {
        put("policy.svg", t)?;
    }
    put("policy.csv", render::csv(export))?;
    Ok(written)
}
