//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if
//! any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use migp_core::attack::{
    fixed_weight, greedy_attack, sample_std, simulate_extraction, synth_distribution, synth_pairs, BallIndex,
    CellResult, ExplicitModel, OracleAnswer, OracleState, PasswordDistribution, RuleModel, SimConfig,
    TranscriptEntry, VariantModel,
};
use migp_core::client::{LocalTransport, MigpClient, QueryOutcome};
use migp_core::oprf::{blind, direct_prf, evaluate, finalize, PrfKey};
use migp_core::pipeline::{
    build_store, bucket_id, rotate_store, Blocklist, BucketStore, BuildParams, Credential, EntryMode, StoreHeader,
    EPOCH_RANGE,
};
use migp_core::rate_limiter::{
    calibrate_timelock, generate_timelock, timelock_fast, timelock_slow, HashSpec, ServerHash,
};
use migp_core::server::{BackgroundServer, MigpServer, RateConfig, ServerConfig};
use migp_core::similarity::{
    dasr_ruleset, derive_path, hybrid_similar, mine_rules, mine_rules_par, RuleSet, TransformationPath,
    UnitTransformation,
};
mod common;

use common::{by_user, probes, synth_corpus};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 oprf correctness", c1_oprf),
        ("2 end-to-end truth table", c2_truth_table),
        ("3 exact-checking degeneracy", c3_degeneracy),
        ("4 key rotation equals rebuild", c4_rotation),
        ("5 built-in rules and plant-and-recover", c5_rules),
        ("6 mining oracle equivalence", c6_mining),
        ("7 greedy attacker faithfulness", c7_greedy),
        ("8 extraction trends", c8_trends),
        ("9 exact-guessing analytic check", c9_analytic),
        ("10 time-lock puzzle", c10_timelock),
        ("11 bucket scaling", c11_buckets),
        ("12 loopback latency", c12_loopback),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        let num = name.split(' ').next().unwrap_or_default();
        if !only.is_empty() && !only.iter().any(|o| o == num) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {name}: {} ({}; {secs:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn c1_oprf() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let key = PrfKey::generate(&mut rng);
    let mut bad = 0;
    for _ in 0..1000 {
        let mut x = vec![0u8; rng.gen_range(1..64)];
        rng.fill_bytes(&mut x);
        let (b, r) = blind(&x, &mut rng).expect("blind");
        if finalize(&x, &evaluate(&key, &b), &r) != direct_prf(&key, &x).expect("prf") {
            bad += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(bad == 0 && secs < 10.0, format!("{bad}/1000 mismatches in {secs:.2} s"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Verdict {
    Match,
    Similar,
    None,
}

fn verdict(o: QueryOutcome) -> Verdict {
    match o {
        QueryOutcome::Match => Verdict::Match,
        QueryOutcome::Similar { .. } => Verdict::Similar,
        QueryOutcome::None => Verdict::None,
    }
}

fn ideal(
    users: &HashMap<String, BTreeSet<String>>,
    u: &str,
    w: &str,
    rules: &RuleSet,
    n: usize,
    m: usize,
) -> Verdict {
    let Some(stored) = users.get(u) else { return Verdict::None };
    if stored.contains(w) {
        Verdict::Match
    } else if stored.iter().any(|wt| hybrid_similar(w, wt, rules, n, rules, m)) {
        Verdict::Similar
    } else {
        Verdict::None
    }
}

fn local_client(corpus: &[Credential], prefix_bits: u8, n: usize, key_seed: u64) -> MigpClient {
    let rules = dasr_ruleset();
    let key = PrfKey::generate(&mut ChaCha20Rng::seed_from_u64(key_seed));
    let out = build_store(
        corpus,
        &key,
        &BuildParams {
            prefix_bits,
            rules: &rules,
            n,
            entry_mode: EntryMode::LastBit,
            hash: &ServerHash::Fast,
            blocklist: &Blocklist::empty(),
            with_sidecar: false,
        },
    )
    .expect("build");
    let server = MigpServer::new(
        out.store,
        key,
        ServerConfig {
            m_max: 11,
            rate: RateConfig::unlimited(),
        },
    )
    .expect("server");
    let transport = Arc::new(LocalTransport::new(Arc::new(server), "acceptance"));
    MigpClient::with_rng(transport, rules, ChaCha20Rng::seed_from_u64(key_seed + 1))
}

fn c2_truth_table() -> Outcome {
    let t = Instant::now();
    let corpus = synth_corpus(2, 10_000);
    let users = by_user(&corpus);
    let rules = dasr_ruleset();
    let client = local_client(&corpus, 8, 10, 20);
    let qs = probes(&corpus, &rules, 1000, 21);
    let mut agree = 0;
    let mut total = 0;
    let mut seen: BTreeMap<Verdict, usize> = BTreeMap::new();
    for m in [0, 10] {
        for (u, w) in &qs {
            let got = verdict(client.check(u, w, m).expect("check"));
            let want = ideal(&users, u, w, &rules, 10, m);
            *seen.entry(want).or_default() += 1;
            total += 1;
            agree += (got == want) as usize;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        agree == total && secs < 300.0,
        format!("{agree}/{total} verdicts agree, ideal mix {seen:?}"),
    )
}

impl PartialOrd for Verdict {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Verdict {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

fn c3_degeneracy() -> Outcome {
    let corpus = synth_corpus(3, 3000);
    let users = by_user(&corpus);
    let rules = dasr_ruleset();
    let client = local_client(&corpus, 8, 0, 30);
    let qs = probes(&corpus, &rules, 600, 31);
    let mut wrong = 0;
    let mut verdicts = BTreeSet::new();
    for (u, w) in &qs {
        let got = verdict(client.check(u, w, 0).expect("check"));
        verdicts.insert(got);
        let member = users.get(u).is_some_and(|s| s.contains(w));
        let want = if member { Verdict::Match } else { Verdict::None };
        wrong += (got != want) as usize;
    }
    let only_exact = verdicts.iter().all(|v| *v != Verdict::Similar);
    outcome(
        wrong == 0 && only_exact,
        format!("{wrong}/{} disagree with exact membership, verdicts {verdicts:?}", qs.len()),
    )
}

fn c4_rotation() -> Outcome {
    let corpus = synth_corpus(4, 1000);
    let rules = dasr_ruleset();
    let mut rng = ChaCha20Rng::seed_from_u64(40);
    let old = PrfKey::generate(&mut rng);
    let new = old.rotate(&mut rng);
    let mut details = Vec::new();
    let mut pass = true;
    let hashes = [
        ("fast", ServerHash::Fast),
        (
            "salted",
            ServerHash::Salted(migp_core::rate_limiter::SaltParams::new(4).expect("bits"), [9; 32]),
        ),
    ];
    for mode in [EntryMode::LastBit, EntryMode::FlagByte] {
        for (hname, hash) in &hashes {
            let params = BuildParams {
                prefix_bits: 10,
                rules: &rules,
                n: 10,
                entry_mode: mode,
                hash,
                blocklist: &Blocklist::empty(),
                with_sidecar: true,
            };
            let built = build_store(&corpus, &old, &params).expect("build");
            let rotated = rotate_store(
                &built.store,
                &old,
                &new,
                built.sidecar.as_ref().expect("sidecar"),
                hash,
            )
            .expect("rotate");
            let fresh = build_store(&corpus, &new, &params).expect("rebuild");
            let mut a = rotated.store.to_bytes();
            let mut b = fresh.store.to_bytes();
            let epochs_ok = rotated.store.header().epoch == new.epoch();
            a[EPOCH_RANGE].fill(0);
            b[EPOCH_RANGE].fill(0);
            let same = a == b;
            pass &= same && epochs_ok;
            details.push(format!(
                "{}/{hname}: {} ({} entries)",
                mode.name(),
                if same { "identical" } else { "DIFFERENT" },
                built.store.entry_count()
            ));
        }
    }
    outcome(pass, details.join(", "))
}

fn c5_rules() -> Outcome {
    let dasr = dasr_ruleset();
    let r = dasr.rules();
    let examples = [
        (0, "secret1", "secret"),
        (5, "secret", "secret1"),
        (1, "secret", "Secret"),
    ];
    let worked = examples
        .iter()
        .filter(|(i, from, to)| r[*i].apply(from).as_deref() == Some(*to))
        .count();
    use migp_core::similarity::KeySymbol::Char;
    let planted = [
        TransformationPath::single(UnitTransformation::insert(Char(b'7'), -1)),
        TransformationPath::single(UnitTransformation::insert(Char(b'#'), 1)),
        TransformationPath::single(UnitTransformation::delete(1)),
        TransformationPath::new(vec![UnitTransformation::delete(-2), UnitTransformation::delete(-1)]).expect("path"),
    ];
    let mut recovered = 0;
    for seed in 0..10u64 {
        let dist = synth_distribution(500 + seed, 2000, 1.0).expect("dist");
        let p = &planted[seed as usize % planted.len()];
        let pairs = synth_pairs(&dist, seed, 1000, p, 0.4);
        let mined = mine_rules(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())), 5).expect("mine");
        if mined.rules()[0].alternatives()[0] == *p {
            recovered += 1;
        }
    }
    outcome(
        worked == 3 && recovered == 10,
        format!("{worked}/3 worked examples, planted tweak recovered at rank 1 for {recovered}/10 seeds"),
    )
}

fn c6_mining() -> Outcome {
    let dasr = dasr_ruleset();
    let mut ok = 0;
    for seed in 0..5u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(600 + seed);
        let dist = synth_distribution(600 + seed, 1500, 1.0).expect("dist");
        let count = rng.gen_range(200..=1000);
        let mut pairs: Vec<(String, String)> = Vec::with_capacity(count);
        while pairs.len() < count {
            let i = dist.sample_indices(2, &mut rng);
            let (a, b) = (&dist.support()[i[0]], &dist.support()[i[1]]);
            let b = if rng.gen_bool(0.6) {
                let rule = &dasr.rules()[rng.gen_range(0..10)];
                rule.apply(a).unwrap_or_else(|| b.clone())
            } else {
                b.clone()
            };
            if *a != b {
                pairs.push((a.clone(), b));
            }
        }
        let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
        for (a, b) in &pairs {
            let p = derive_path(a, b).expect("path");
            let e = counts.entry(p.to_string()).or_insert((0, p.len()));
            e.0 += 1;
        }
        let mut oracle: Vec<(String, u64, usize)> = counts.into_iter().map(|(k, (c, l))| (k, c, l)).collect();
        oracle.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
        let mined = mine_rules(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())), usize::MAX).expect("mine");
        let par = mine_rules_par(&pairs, usize::MAX).expect("mine");
        let got: Vec<(String, u64)> = mined
            .rules()
            .iter()
            .map(|r| (r.alternatives()[0].to_string(), r.support()))
            .collect();
        let want: Vec<(String, u64)> = oracle.into_iter().map(|(k, c, _)| (k, c)).collect();
        if got == want && par.rules() == mined.rules() {
            ok += 1;
        }
    }
    outcome(ok == 5, format!("{ok}/5 corpora rank identically to the count-and-sort oracle"))
}

/// Independent set-based re-implementation of the game and the greedy
/// attacker, used only to cross-check the library.
mod reference {
    use super::*;

    pub struct Case {
        pub dist: PasswordDistribution,
        pub tau: HashMap<String, BTreeSet<String>>,
    }

    impl Case {
        fn expand(&self, w: &str) -> BTreeSet<String> {
            let mut s = self.tau.get(w).cloned().unwrap_or_default();
            s.insert(w.to_owned());
            s
        }

        fn ball(&self, w_set: &BTreeSet<String>, c: &str) -> BTreeSet<String> {
            w_set.iter().filter(|w| self.expand(w).contains(c)).cloned().collect()
        }
    }

    pub struct Run {
        pub transcript: Vec<(Vec<String>, OracleAnswer)>,
        pub success: bool,
    }

    pub fn run(case: &Case, target: &str, q: usize, m: usize) -> Run {
        let fp: HashMap<&str, u64> = case.dist.iter().map(|(w, p)| (w, fixed_weight(p))).collect();
        let order: Vec<&str> = case.dist.support().iter().map(String::as_str).collect();
        let tau_star = case.tau.get(target).cloned().unwrap_or_default();
        // game state
        let mut budget = q;
        // attacker state: W, p (zeroed set), W'
        let mut w_set: BTreeSet<String> = order.iter().map(|w| w.to_string()).collect();
        let mut zero: BTreeSet<String> = BTreeSet::new();
        let mut w_prime: BTreeSet<String> = w_set.iter().flat_map(|w| case.expand(w)).collect();
        let mut retired: BTreeSet<String> = BTreeSet::new();
        let mut transcript = Vec::new();
        let mut matched = false;
        loop {
            let weight = |c: &str, w_set: &BTreeSet<String>, zero: &BTreeSet<String>| -> u64 {
                case.ball(w_set, c).iter().filter(|w| !zero.contains(*w)).map(|w| fp[w.as_str()]).sum()
            };
            let mut cands: Vec<(u64, String)> = w_prime
                .iter()
                .filter(|c| !retired.contains(*c))
                .map(|c| (weight(c, &w_set, &zero), c.clone()))
                .filter(|(wt, _)| *wt > 0)
                .collect();
            cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let picks: Vec<String> = cands.into_iter().take(m).map(|(_, c)| c).collect();
            if picks.is_empty() {
                break;
            }
            for p in &picks {
                retired.insert(p.clone());
            }
            if budget == 0 {
                break;
            }
            budget -= 1;
            let answer = if budget == 0 {
                OracleAnswer::Exhausted
            } else {
                let mut a = OracleAnswer::None;
                for (i, g) in picks.iter().enumerate() {
                    if g == target {
                        a = OracleAnswer::Match(i + 1);
                        break;
                    }
                    if tau_star.contains(g) {
                        a = OracleAnswer::Similar(i + 1);
                        break;
                    }
                }
                a
            };
            transcript.push((picks.clone(), answer));
            let none_on = |c: &str,
                           w_set: &mut BTreeSet<String>,
                           zero: &mut BTreeSet<String>,
                           retired: &mut BTreeSet<String>| {
                let b = case.ball(w_set, c);
                for w in b {
                    w_set.remove(&w);
                    zero.insert(w.clone());
                    retired.insert(w);
                }
            };
            match answer {
                OracleAnswer::Exhausted => break,
                OracleAnswer::Match(_) => {
                    matched = true;
                    break;
                }
                OracleAnswer::Similar(i) => {
                    for c in &picks[..i - 1] {
                        none_on(c, &mut w_set, &mut zero, &mut retired);
                    }
                    let b: BTreeSet<String> =
                        case.ball(&w_set, &picks[i - 1]).into_iter().filter(|w| !zero.contains(w)).collect();
                    for w in &w_set {
                        if !b.contains(w) {
                            zero.insert(w.clone());
                        }
                    }
                    w_prime = b.iter().flat_map(|w| case.expand(w)).collect();
                }
                OracleAnswer::None => {
                    for c in &picks {
                        none_on(c, &mut w_set, &mut zero, &mut retired);
                    }
                }
            }
        }
        let final_guess = order.iter().find(|w| w_set.contains(**w) && !zero.contains(**w));
        let success = matched || final_guess == Some(&target);
        Run { transcript, success }
    }
}

fn random_case(seed: u64) -> (reference::Case, ExplicitModel) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let size = rng.gen_range(1..=12);
    let n = rng.gen_range(0..=3);
    let extra = rng.gen_range(0..=6);
    let words: Vec<String> = (0..size).map(|i| format!("p{i}")).collect();
    let universe: Vec<String> = words.iter().cloned().chain((0..extra).map(|i| format!("v{i}"))).collect();
    let entries: Vec<(String, f64)> = words.iter().map(|w| (w.clone(), rng.gen_range(1..=20) as f64)).collect();
    let dist = PasswordDistribution::new(entries).expect("dist");
    let mut tau = HashMap::new();
    let mut model = ExplicitModel::new();
    for w in &words {
        let k = rng.gen_range(0..=n);
        let others: Vec<&String> = universe.iter().filter(|u| *u != w).collect();
        let picked: BTreeSet<String> = others.choose_multiple(&mut rng, k.min(others.len())).map(|s| (*s).clone()).collect();
        let refs: Vec<&str> = picked.iter().map(String::as_str).collect();
        model.insert(w, &refs);
        tau.insert(w.clone(), picked);
    }
    (reference::Case { dist, tau }, model)
}

fn c7_greedy() -> Outcome {
    let none = HashSet::new();
    let mut runs = 0;
    let mut agree = 0;
    let mut first_bad = None;
    for seed in 0..100u64 {
        let (case, model) = random_case(7000 + seed);
        let idx = BallIndex::build(&case.dist, &model, &none);
        for target in case.dist.support() {
            for q in [1, 2, 3, 5, 8, 13] {
                for m in [1, 2, 3] {
                    let oracle = OracleState::new(target, &model as &dyn VariantModel, q, m, &none).expect("oracle");
                    let got = greedy_attack(&idx, oracle, m, true).expect("attack");
                    let want = reference::run(&case, target, q, m);
                    let got_t: Vec<(Vec<String>, OracleAnswer)> = got
                        .transcript
                        .iter()
                        .map(|TranscriptEntry { guesses, answer }| (guesses.clone(), *answer))
                        .collect();
                    runs += 1;
                    if got_t == want.transcript && got.success == want.success {
                        agree += 1;
                    } else if first_bad.is_none() {
                        first_bad = Some(format!("seed {seed} target {target} q {q} m {m}"));
                    }
                }
            }
        }
    }
    outcome(
        agree == runs,
        format!(
            "{agree}/{runs} runs agree on transcript and success{}",
            first_bad.map(|b| format!(", first mismatch {b}")).unwrap_or_default()
        ),
    )
}

fn trend_rows() -> &'static [CellResult] {
    use std::sync::OnceLock;
    static ROWS: OnceLock<Vec<CellResult>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let dist = synth_distribution(2024, 10_000, 1.0).expect("dist");
        let cfg = SimConfig {
            n_grid: vec![0, 10],
            beta_grid: vec![0, 100],
            q_grid: vec![10, 100, 1000],
            m_grid: vec![1, 10],
            targets: 500,
            folds: 5,
            seed: 7,
            ..SimConfig::default()
        };
        simulate_extraction(&dist, |n| RuleModel::new(dasr_ruleset(), n), &cfg).expect("simulate")
    })
}

fn cell(rows: &[CellResult], n: usize, beta: usize, q: usize, m: usize) -> &CellResult {
    rows.iter()
        .find(|r| r.n == n && r.beta == beta && r.q == q && r.m == m)
        .expect("cell in grid")
}

/// `hi > lo` by at least two standard deviations of the per-fold
/// difference; the combined per-cell deviation is reported alongside.
fn margin(label: &str, hi: &CellResult, lo: &CellResult) -> (bool, String) {
    let diffs: Vec<f64> = hi.fold_pct.iter().zip(&lo.fold_pct).map(|(a, b)| a - b).collect();
    let gap = hi.success_pct - lo.success_pct;
    let sd = sample_std(&diffs);
    let combined = (hi.std_pct.powi(2) + lo.std_pct.powi(2)).sqrt();
    (
        gap > 0.0 && gap >= 2.0 * sd,
        format!(
            "{label}: {:.2} vs {:.2}, gap {gap:.2} vs 2 sd(fold diff) {:.2} [2 sqrt(sa^2+sb^2) {:.2}]",
            hi.success_pct,
            lo.success_pct,
            2.0 * sd,
            2.0 * combined
        ),
    )
}

fn c8_trends() -> Outcome {
    let t = Instant::now();
    let rows = trend_rows();
    let (a, da) = margin("(a) n=10 > n=0 at q=1000", cell(rows, 10, 0, 1000, 1), cell(rows, 0, 0, 1000, 1));
    let (b, db) = margin("(b) beta=0 > beta=100 at n=10 q=100", cell(rows, 10, 0, 100, 1), cell(rows, 10, 100, 100, 1));
    let (c, dc) = margin("(c) m=10 > m=1 at n=10 q=100", cell(rows, 10, 0, 100, 10), cell(rows, 10, 0, 100, 1));
    let secs = t.elapsed().as_secs_f64();
    outcome(a && b && c && secs < 1800.0, format!("{da}; {db}; {dc}"))
}

fn c9_analytic() -> Outcome {
    let rows = trend_rows();
    let dist = synth_distribution(2024, 10_000, 1.0).expect("dist");
    let mut pass = true;
    let mut parts = Vec::new();
    for q in [10, 100, 1000] {
        let r = cell(rows, 0, 0, q, 1);
        let p = dist.top_mass(q);
        let se = 100.0 * (p * (1.0 - p) / r.targets as f64).sqrt();
        let ok = (r.success_pct - 100.0 * p).abs() <= 2.0 * se;
        pass &= ok;
        parts.push(format!("q={q}: {:.2} vs {:.2} ± {:.2}", r.success_pct, 100.0 * p, 2.0 * se));
    }
    outcome(pass, parts.join(", "))
}

fn time_min(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .expect("reps")
}

fn c10_timelock() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let (base, trapdoor) = generate_timelock(2048, 1 << 10, &mut rng).expect("modulus");
    let mut mismatches = 0;
    for v in [1u64 << 10, 1 << 14] {
        let p = base.with_v(v).expect("v");
        for i in 0..100u32 {
            let x = format!("input-{v}-{i}");
            if timelock_fast(&p, &trapdoor, x.as_bytes()) != timelock_slow(&p, x.as_bytes()) {
                mismatches += 1;
            }
        }
    }
    let lo = base.with_v(1 << 14).expect("v");
    let hi = base.with_v(1 << 16).expect("v");
    let t_lo = time_min(3, || {
        timelock_slow(&lo, b"scaling");
    });
    let t_hi = time_min(3, || {
        timelock_slow(&hi, b"scaling");
    });
    let ratio = t_hi.as_secs_f64() / t_lo.as_secs_f64();
    let linear = (2.0..=8.0).contains(&ratio);
    let cal = calibrate_timelock(&base, Duration::from_millis(100)).expect("calibrate");
    let slow = time_min(3, || {
        timelock_slow(&cal, b"calibrated");
    });
    let fast = time_min(20, || {
        timelock_fast(&cal, &trapdoor, b"calibrated");
    });
    let speedup = slow.as_secs_f64() / fast.as_secs_f64();
    outcome(
        mismatches == 0 && linear && speedup >= 50.0,
        format!(
            "{mismatches}/200 fast/slow mismatches; 4x squarings took {ratio:.2}x; at v={} slow {:.1} ms, fast {:.3} ms, {speedup:.0}x",
            cal.v(),
            slow.as_secs_f64() * 1e3,
            fast.as_secs_f64() * 1e3
        ),
    )
}

fn c11_buckets() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let users: Vec<String> = (0..1_000_000)
        .map(|i| format!("{:016x}{i}", rng.next_u64()))
        .collect();
    let mut stats = Vec::new();
    for l in [12u8, 16] {
        let header = StoreHeader::new(l, EntryMode::LastBit, HashSpec::Fast, 0, 0, 0, "none").expect("header");
        let entries = users.iter().map(|u| {
            let mut e = vec![0u8; 16];
            rng.fill_bytes(&mut e);
            (bucket_id(u, l).expect("bucket").index() as u32, e)
        });
        let store = BucketStore::from_entries(header, entries).expect("store");
        stats.push(store.stats());
    }
    let ratio = stats[0].mean / stats[1].mean;
    let conserved = stats[0].entries == 1_000_000 && stats[1].entries == 1_000_000;
    outcome(
        (ratio - 16.0).abs() <= 1.6 && conserved,
        format!(
            "mean {:.2} (sd {:.2}) at l=12, {:.2} (sd {:.2}) at l=16, ratio {ratio:.3}, entries {} / {}",
            stats[0].mean, stats[0].std, stats[1].mean, stats[1].std, stats[0].entries, stats[1].entries
        ),
    )
}

fn c12_loopback() -> Outcome {
    let corpus = synth_corpus(12, 5000);
    let rules = dasr_ruleset();
    let key = PrfKey::generate(&mut ChaCha20Rng::seed_from_u64(120));
    let out = build_store(
        &corpus,
        &key,
        &BuildParams {
            prefix_bits: 8,
            rules: &rules,
            n: 10,
            entry_mode: EntryMode::LastBit,
            hash: &ServerHash::Fast,
            blocklist: &Blocklist::empty(),
            with_sidecar: false,
        },
    )
    .expect("build");
    let server = Arc::new(MigpServer::new(out.store, key, ServerConfig::default()).expect("server"));
    let bg = BackgroundServer::start(server, "127.0.0.1:0".parse().expect("addr")).expect("listen");
    let transport = Arc::new(migp_core::client::HttpTransport::new(&bg.url(), None, Duration::from_secs(10)));
    let client = MigpClient::new(transport, rules);
    let c = &corpus[17];
    let t = Instant::now();
    let res = client.check(c.username(), c.password(), 10);
    let elapsed = t.elapsed();
    let _ = bg.stop();
    let ok = matches!(res, Ok(QueryOutcome::Match));
    outcome(
        ok && elapsed < Duration::from_secs(1),
        format!("cold query with m=10 returned {res:?} in {:.1} ms", elapsed.as_secs_f64() * 1e3),
    )
}
