//! The greedy breach-extraction attacker.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::balls::BallIndex;
use super::oracle::{OracleAnswer, OracleState, TranscriptEntry};
use super::AttackError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackOutcome {
    pub transcript: Vec<TranscriptEntry>,
    /// The guess the oracle confirmed, if any.
    pub matched: Option<String>,
    /// The most probable password still consistent with the answers.
    pub final_guess: Option<String>,
    pub success: bool,
}

/// What one oracle call taught the attacker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Step {
    Continue,
    Matched(String),
    /// No guess with positive weight remains.
    Stuck,
    Exhausted,
}

/// Attacker state over a [`BallIndex`]: live passwords, live centers and
/// current ball weights, with a lazily refreshed max-heap. Weights only
/// decrease, so a popped entry whose weight is stale is pushed back with
/// its current value.
pub(crate) struct Engine<'a> {
    idx: &'a BallIndex,
    alive: Vec<bool>,
    weight: Vec<u64>,
    active: Vec<bool>,
    guessed: Vec<bool>,
    heap: BinaryHeap<(u64, Reverse<u32>)>,
    first_alive: usize,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(idx: &'a BallIndex) -> Self {
        let nc = idx.num_centers();
        let mut weight = vec![0u64; nc];
        for (cid, w) in weight.iter_mut().enumerate() {
            *w = idx.members(cid as u32).iter().map(|p| idx.fp(*p)).sum();
        }
        let active: Vec<bool> = (0..nc as u32).map(|c| idx.usable(c)).collect();
        let heap = (0..nc as u32)
            .filter(|c| active[*c as usize] && weight[*c as usize] > 0)
            .map(|c| (weight[c as usize], Reverse(c)))
            .collect::<Vec<_>>()
            .into();
        Engine {
            idx,
            alive: vec![true; idx.num_passwords()],
            weight,
            active,
            guessed: vec![false; nc],
            heap,
            first_alive: 0,
        }
    }

    /// The most probable live password (ties by string, which the
    /// distribution order already encodes).
    pub(crate) fn best_password(&mut self) -> Option<&'a str> {
        while self.first_alive < self.alive.len() && !self.alive[self.first_alive] {
            self.first_alive += 1;
        }
        (self.first_alive < self.alive.len()).then(|| self.idx.password(self.first_alive as u32))
    }

    /// Up to `m` heaviest live centers, heaviest first, ties by string.
    fn select(&mut self, m: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            let Some((w, Reverse(c))) = self.heap.pop() else { break };
            let ci = c as usize;
            if !self.active[ci] || self.weight[ci] == 0 {
                continue;
            }
            if w != self.weight[ci] {
                self.heap.push((self.weight[ci], Reverse(c)));
                continue;
            }
            self.active[ci] = false;
            self.guessed[ci] = true;
            out.push(c);
        }
        out
    }

    fn kill(&mut self, pid: u32) {
        let p = pid as usize;
        if !self.alive[p] {
            return;
        }
        self.alive[p] = false;
        let fp = self.idx.fp(pid);
        for c in self.idx.centers_of(pid) {
            self.weight[*c as usize] -= fp;
        }
    }

    /// A none answer: every member of `B(cid)` is ruled out and none of
    /// them is guessed later.
    fn eliminate(&mut self, cid: u32) {
        for &pid in self.idx.members(cid) {
            self.kill(pid);
            let own = self.idx.self_center(pid) as usize;
            self.active[own] = false;
            self.guessed[own] = true;
        }
    }

    /// Keeps only the live members of `B(cid)` and restricts the candidate
    /// guesses to their expansions, minus anything already guessed.
    fn restrict(&mut self, cid: u32) {
        let mut keep = vec![false; self.alive.len()];
        for &pid in self.idx.members(cid) {
            keep[pid as usize] = self.alive[pid as usize];
        }
        for (a, k) in self.alive.iter_mut().zip(&keep) {
            *a = *k;
        }
        self.active.iter_mut().for_each(|a| *a = false);
        let mut touched = Vec::new();
        for &pid in self.idx.members(cid) {
            if !self.alive[pid as usize] {
                continue;
            }
            for &c in self.idx.centers_of(pid) {
                let ci = c as usize;
                if !self.active[ci] && self.idx.usable(c) && !self.guessed[ci] {
                    self.active[ci] = true;
                    touched.push(c);
                }
            }
        }
        for &c in &touched {
            let idx = self.idx;
            let alive = &self.alive;
            self.weight[c as usize] = idx
                .members(c)
                .iter()
                .filter(|p| alive[**p as usize])
                .map(|p| idx.fp(*p))
                .sum();
        }
        self.heap = touched
            .into_iter()
            .filter(|c| self.weight[*c as usize] > 0)
            .map(|c| (self.weight[c as usize], Reverse(c)))
            .collect::<Vec<_>>()
            .into();
    }

    /// Sends the next batch of up to `m` guesses and updates the state.
    pub(crate) fn step(&mut self, oracle: &mut OracleState<'_>, m: usize) -> Result<Step, AttackError> {
        let picks = self.select(m.min(oracle.m_max()));
        if picks.is_empty() {
            return Ok(Step::Stuck);
        }
        let guesses: Vec<&str> = picks.iter().map(|c| self.idx.center(*c)).collect();
        match oracle.query(&guesses)? {
            OracleAnswer::Exhausted => Ok(Step::Exhausted),
            OracleAnswer::Match(i) => Ok(Step::Matched(guesses[i - 1].to_owned())),
            OracleAnswer::Similar(i) => {
                for &c in &picks[..i - 1] {
                    self.eliminate(c);
                }
                self.restrict(picks[i - 1]);
                Ok(Step::Continue)
            }
            OracleAnswer::None => {
                for &c in &picks {
                    self.eliminate(c);
                }
                Ok(Step::Continue)
            }
        }
    }
}

/// Runs the attacker against `oracle` until a match, an exhausted budget or
/// no remaining candidate. With `final_guess_counts` the attacker's last
/// output (the most probable consistent password) also wins.
pub fn greedy_attack(
    idx: &BallIndex,
    mut oracle: OracleState<'_>,
    m: usize,
    final_guess_counts: bool,
) -> Result<AttackOutcome, AttackError> {
    if m == 0 {
        return Err(AttackError::Invalid("batch size must be at least 1".into()));
    }
    if idx.num_passwords() == 0 {
        return Err(AttackError::EmptyDistribution);
    }
    let mut engine = Engine::new(idx);
    let mut matched = None;
    loop {
        match engine.step(&mut oracle, m)? {
            Step::Continue => {}
            Step::Matched(g) => {
                matched = Some(g);
                break;
            }
            Step::Stuck | Step::Exhausted => break,
        }
    }
    let target = oracle.target().to_owned();
    let final_guess = match &matched {
        Some(g) => Some(g.clone()),
        None => engine.best_password().map(str::to_owned),
    };
    let success = matched.is_some() || (final_guess_counts && final_guess.as_deref() == Some(target.as_str()));
    Ok(AttackOutcome {
        transcript: oracle.into_transcript(),
        matched,
        final_guess,
        success,
    })
}

/// Success at each budget in `qs` from one run at the largest budget. A
/// budget of `q` allows `q - 1` answered queries plus the final output.
pub(crate) fn success_at_budgets(
    idx: &BallIndex,
    oracle: &mut OracleState<'_>,
    m: usize,
    qs: &[usize],
    final_guess_counts: bool,
) -> Result<Vec<bool>, AttackError> {
    let target = oracle.target().to_owned();
    let max_q = qs.iter().copied().max().unwrap_or(1);
    let mut engine = Engine::new(idx);
    // at[k] = success after k answered queries
    let mut at: Vec<bool> = Vec::with_capacity(max_q);
    let mut matched = false;
    let mut done = false;
    for k in 0..max_q {
        if k > 0 && !done {
            match engine.step(oracle, m)? {
                Step::Continue => {}
                Step::Matched(_) => {
                    matched = true;
                    done = true;
                }
                Step::Stuck | Step::Exhausted => done = true,
            }
        }
        let ok = matched || (final_guess_counts && engine.best_password() == Some(target.as_str()));
        at.push(ok);
    }
    Ok(qs.iter().map(|q| at[q.saturating_sub(1)]).collect())
}
