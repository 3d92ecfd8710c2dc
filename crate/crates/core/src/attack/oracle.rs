//! The ideal MIGP functionality a malicious client interacts with.

use std::collections::HashSet;

use super::model::VariantModel;
use super::AttackError;

/// Indices are 1-based positions in the guess list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleAnswer {
    Match(usize),
    Similar(usize),
    None,
    /// The budget ran out; the game answers none without looking.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub guesses: Vec<String>,
    pub answer: OracleAnswer,
}

/// Game state for one target password.
#[derive(Debug)]
pub struct OracleState<'a> {
    target: String,
    tau: HashSet<String>,
    budget: usize,
    m_max: usize,
    blocked: &'a HashSet<String>,
    transcript: Vec<TranscriptEntry>,
}

impl<'a> OracleState<'a> {
    pub fn new(
        target: &str,
        model: &dyn VariantModel,
        q: usize,
        m_max: usize,
        blocked: &'a HashSet<String>,
    ) -> Result<Self, AttackError> {
        if q == 0 || m_max == 0 {
            return Err(AttackError::Invalid("q and m_max must be at least 1".into()));
        }
        Ok(OracleState {
            target: target.to_owned(),
            tau: model.variants(target).into_iter().collect(),
            budget: q,
            m_max,
            blocked,
            transcript: Vec::new(),
        })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn into_transcript(self) -> Vec<TranscriptEntry> {
        self.transcript
    }

    /// One invocation. The budget is decremented first and the call is
    /// refused once it reaches zero, so a budget of `q` yields `q - 1`
    /// informative answers. Blocklisted guesses never hit, and a
    /// blocklisted target makes every answer none.
    pub fn query<S: AsRef<str>>(&mut self, guesses: &[S]) -> Result<OracleAnswer, AttackError> {
        if guesses.is_empty() || guesses.len() > self.m_max {
            return Err(AttackError::Invalid(format!(
                "query must carry 1..={} guesses, got {}",
                self.m_max,
                guesses.len()
            )));
        }
        if self.budget == 0 {
            return Ok(OracleAnswer::Exhausted);
        }
        self.budget -= 1;
        let answer = if self.budget == 0 {
            OracleAnswer::Exhausted
        } else {
            self.answer(guesses)
        };
        self.transcript.push(TranscriptEntry {
            guesses: guesses.iter().map(|g| g.as_ref().to_owned()).collect(),
            answer,
        });
        Ok(answer)
    }

    fn answer<S: AsRef<str>>(&self, guesses: &[S]) -> OracleAnswer {
        if self.blocked.contains(&self.target) {
            return OracleAnswer::None;
        }
        for (i, g) in guesses.iter().enumerate() {
            let g = g.as_ref();
            if self.blocked.contains(g) {
                continue;
            }
            if g == self.target {
                return OracleAnswer::Match(i + 1);
            }
            if self.tau.contains(g) {
                return OracleAnswer::Similar(i + 1);
            }
        }
        OracleAnswer::None
    }
}
