//! Grounded form of a spec and the backtracking search over it.

use std::ops::Range;
use std::sync::Arc;

use crate::dsl::{ConstraintRule, OutlineSpec, SceneAssignment};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Choice {
    pub func: usize,
    pub param: Option<usize>,
}

#[derive(Debug, Clone, Default)]
struct FunctionRules {
    max: Option<u32>,
    need: u32,
    /// `(prior, k)`: at least `k` scenes of `prior` before any scene of this function.
    priors: Vec<(usize, u32)>,
    /// Functions that must not have occurred when this one first occurs.
    must_not_lead: Vec<usize>,
    distinct: bool,
}

/// A spec expanded over its scene timeline into index-based tables.
#[derive(Debug, Clone)]
pub(crate) struct Grounded {
    pub num_scenes: usize,
    pub choices: Vec<Choice>,
    pub alphabet: Vec<SceneAssignment>,
    rules: Vec<FunctionRules>,
    required: Vec<Vec<usize>>,
    forbidden: Vec<Vec<usize>>,
    no_adjacent: bool,
    total_need: u32,
}

impl Grounded {
    /// Assumes `spec` passed validation.
    pub fn new(spec: &OutlineSpec) -> Self {
        let idx = |name: &str| {
            spec.function_index(name)
                .expect("validated spec references only declared functions")
        };
        let mut choices = Vec::new();
        for (fi, def) in spec.functions.iter().enumerate() {
            if def.params.is_empty() {
                choices.push(Choice { func: fi, param: None });
            } else {
                for pi in 0..def.params.len() {
                    choices.push(Choice { func: fi, param: Some(pi) });
                }
            }
        }
        let alphabet = spec.scene_choices();
        debug_assert_eq!(alphabet.len(), choices.len());

        let n = spec.num_scenes;
        let mut rules = vec![FunctionRules::default(); spec.functions.len()];
        let mut required = vec![Vec::new(); n];
        let mut forbidden = vec![Vec::new(); n];
        let mut no_adjacent = false;
        for rule in &spec.constraints {
            match rule {
                ConstraintRule::NoAdjacentRepeat => no_adjacent = true,
                ConstraintRule::RequireCountBefore {
                    function,
                    prior,
                    min_count,
                } => rules[idx(function)].priors.push((idx(prior), *min_count)),
                ConstraintRule::AtMost { function, max } => {
                    let r = &mut rules[idx(function)];
                    r.max = Some(r.max.map_or(*max, |m| m.min(*max)));
                }
                ConstraintRule::AtLeast { function, min } => {
                    let r = &mut rules[idx(function)];
                    r.need = r.need.max(*min);
                }
                ConstraintRule::ForbidAtScene { function, scene } => {
                    forbidden[scene - 1].push(idx(function))
                }
                ConstraintRule::RequireAtScene { function, scene } => {
                    required[scene - 1].push(idx(function))
                }
                ConstraintRule::FirstPrecedes { first, then } => {
                    rules[idx(first)].must_not_lead.push(idx(then))
                }
                ConstraintRule::DistinctParams { function } => rules[idx(function)].distinct = true,
            }
        }
        let total_need = rules.iter().map(|r| r.need).sum();
        Self {
            num_scenes: n,
            choices,
            alphabet,
            rules,
            required,
            forbidden,
            no_adjacent,
            total_need,
        }
    }
}

/// Depth-first search with an explicit stack. Each call to
/// [`Search::next_model`] resumes where the previous model was found.
pub(crate) struct Search {
    g: Arc<Grounded>,
    counts: Vec<u32>,
    used_params: Vec<u64>,
    deficit: u32,
    stack: Vec<u16>,
    cursor: usize,
    /// Choices tried at the first scene.
    root: Range<usize>,
    done: bool,
}

impl Search {
    pub fn new(g: Arc<Grounded>) -> Self {
        let width = g.choices.len();
        Self::with_root(g, 0..width)
    }

    /// Restricts the search to the subtree whose first scene is `choice`.
    pub fn with_first(g: Arc<Grounded>, choice: usize) -> Self {
        Self::with_root(g, choice..choice + 1)
    }

    fn with_root(g: Arc<Grounded>, root: Range<usize>) -> Self {
        let nf = g.rules.len();
        Self {
            counts: vec![0; nf],
            used_params: vec![0; nf],
            deficit: g.total_need,
            stack: Vec::with_capacity(g.num_scenes),
            cursor: root.start,
            root,
            done: false,
            g,
        }
    }

    pub fn current(&self) -> &[u16] {
        &self.stack
    }

    fn admissible(&self, c: usize) -> bool {
        let g = &*self.g;
        let depth = self.stack.len();
        let Choice { func: f, param } = g.choices[c];
        if g.required[depth].iter().any(|&r| r != f) || g.forbidden[depth].contains(&f) {
            return false;
        }
        if g.no_adjacent {
            if let Some(&prev) = self.stack.last() {
                if g.choices[prev as usize].func == f {
                    return false;
                }
            }
        }
        let r = &g.rules[f];
        let count = self.counts[f];
        if r.max.is_some_and(|m| count >= m) {
            return false;
        }
        if r.priors.iter().any(|&(p, k)| self.counts[p] < k) {
            return false;
        }
        if count == 0 && r.must_not_lead.iter().any(|&t| self.counts[t] > 0) {
            return false;
        }
        if r.distinct {
            if let Some(p) = param {
                if self.used_params[f] & (1 << p) != 0 {
                    return false;
                }
            }
        }
        // unmet minima must still fit in the scenes left after this one
        let deficit = self.deficit - u32::from(count < r.need);
        let remaining = (g.num_scenes - depth - 1) as u32;
        deficit <= remaining
    }

    fn push(&mut self, c: usize) {
        let Choice { func: f, param } = self.g.choices[c];
        if self.counts[f] < self.g.rules[f].need {
            self.deficit -= 1;
        }
        self.counts[f] += 1;
        if let Some(p) = param {
            self.used_params[f] |= 1 << p;
        }
        self.stack.push(c as u16);
    }

    fn pop(&mut self) -> usize {
        let c = self.stack.pop().expect("pop on empty stack") as usize;
        let Choice { func: f, param } = self.g.choices[c];
        self.counts[f] -= 1;
        if self.counts[f] < self.g.rules[f].need {
            self.deficit += 1;
        }
        if let Some(p) = param {
            self.used_params[f] &= !(1 << p);
        }
        c
    }

    /// Advances to the next model in lexicographic choice order.
    pub fn next_model(&mut self) -> bool {
        if self.done {
            return false;
        }
        let n = self.g.num_scenes;
        let width = self.g.choices.len();
        if self.stack.len() == n {
            self.cursor = self.pop() + 1;
        }
        loop {
            let end = if self.stack.is_empty() { self.root.end } else { width };
            if self.cursor < end {
                let c = self.cursor;
                if self.admissible(c) {
                    self.push(c);
                    if self.stack.len() == n {
                        return true;
                    }
                    self.cursor = 0;
                } else {
                    self.cursor += 1;
                }
            } else if self.stack.is_empty() {
                self.done = true;
                return false;
            } else {
                self.cursor = self.pop() + 1;
            }
        }
    }
}
