//! Viterbi decoding of the fastest fingering path.

use serde::{Deserialize, Serialize};

use crate::fingering::{Fingering, KeyTable, Transition};
use crate::model::CostModel;

/// Predicted maximum trill speed of moving between two fingerings.
pub trait TransitionScorer {
    fn score(&self, from: &Fingering, to: &Fingering) -> f64;
}

impl<F: Fn(&Fingering, &Fingering) -> f64> TransitionScorer for F {
    fn score(&self, from: &Fingering, to: &Fingering) -> f64 {
        self(from, to)
    }
}

pub struct ModelScorer<'a> {
    pub model: &'a CostModel,
    pub keys: &'a KeyTable,
}

impl TransitionScorer for ModelScorer<'_> {
    fn score(&self, from: &Fingering, to: &Fingering) -> f64 {
        self.model.predict(&Transition::new(from.clone(), to.clone()), self.keys)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathObjective {
    /// Maximize the sum of predicted speeds.
    #[default]
    Sum,
    /// Maximize the slowest predicted speed on the path.
    Bottleneck,
}

impl PathObjective {
    pub fn combine(self, acc: f64, step: f64) -> f64 {
        match self {
            PathObjective::Sum => acc + step,
            PathObjective::Bottleneck => acc.min(step),
        }
    }

    /// Value of a path without transitions.
    pub fn identity(self) -> f64 {
        match self {
            PathObjective::Sum => 0.0,
            PathObjective::Bottleneck => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Option index chosen at each stage.
    pub choice: Vec<usize>,
    pub objective: f64,
}

/// Exact dynamic program over stages of `options`, each listed in chart
/// order. Ties go to the earlier option: the last stage takes the first
/// optimal state and each back-pointer the first optimal predecessor.
pub fn viterbi<S: TransitionScorer + ?Sized>(options: &[Vec<&Fingering>], scorer: &S, objective: PathObjective) -> Decoded {
    if options.is_empty() {
        return Decoded {
            choice: Vec::new(),
            objective: objective.identity(),
        };
    }
    assert!(options.iter().all(|o| !o.is_empty()), "every stage needs at least one option");
    let mut value: Vec<f64> = vec![objective.identity(); options[0].len()];
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(options.len());
    back.push(Vec::new());
    for i in 1..options.len() {
        let mut next = Vec::with_capacity(options[i].len());
        let mut ptr = Vec::with_capacity(options[i].len());
        for to in &options[i] {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (p, from) in options[i - 1].iter().enumerate() {
                let v = objective.combine(value[p], scorer.score(from, to));
                if v > best {
                    best = v;
                    arg = p;
                }
            }
            next.push(best);
            ptr.push(arg);
        }
        value = next;
        back.push(ptr);
    }
    let mut state = 0;
    for (s, v) in value.iter().enumerate() {
        if *v > value[state] {
            state = s;
        }
    }
    let objective_value = value[state];
    let mut choice = vec![0; options.len()];
    for i in (0..options.len()).rev() {
        choice[i] = state;
        if i > 0 {
            state = back[i][state];
        }
    }
    Decoded {
        choice,
        objective: objective_value,
    }
}

/// Objective of a given path, accumulated left to right like the decoder.
pub fn path_value<S: TransitionScorer + ?Sized>(path: &[&Fingering], scorer: &S, objective: PathObjective) -> f64 {
    path.windows(2)
        .fold(objective.identity(), |acc, w| objective.combine(acc, scorer.score(w[0], w[1])))
}
