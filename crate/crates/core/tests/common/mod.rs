//! Brute-force reference: full joint enumeration over every variable of a
//! spec, reading the CPTs straight from the serialized tables.

#![allow(dead_code)]

pub mod fakes;

use std::collections::HashMap;

use userdrift::scm::{Assignment, RespondentMode, ScmSpec};

pub struct Brute<'a> {
    spec: &'a ScmSpec,
    cards: HashMap<String, usize>,
}

/// A full assignment of every variable, as state indices.
type World = HashMap<String, usize>;

impl<'a> Brute<'a> {
    pub fn new(spec: &'a ScmSpec) -> Self {
        let mut cards = HashMap::new();
        for v in spec.l_vars.iter().chain(&spec.x_vars).chain(&spec.z_vars).chain(&spec.lprime_vars) {
            cards.insert(v.name.clone(), v.states.len());
        }
        cards.insert(spec.treatment.clone(), 2);
        cards.insert(spec.outcome.name.clone(), spec.outcome.states.len());
        Self { spec, cards }
    }

    fn state(&self, var: &str, value: &str) -> usize {
        self.spec
            .l_vars
            .iter()
            .chain(&self.spec.x_vars)
            .chain(&self.spec.z_vars)
            .chain(&self.spec.lprime_vars)
            .find(|v| v.name == var)
            .and_then(|v| v.states.iter().position(|s| s == value))
            .unwrap_or_else(|| panic!("no state {value} of {var}"))
    }

    fn row(&self, parents: &[String], w: &World) -> usize {
        parents.iter().fold(0, |acc, p| acc * self.cards[p] + w[p])
    }

    fn x_col(&self, w: &World) -> usize {
        self.spec.x_vars.iter().fold(0, |acc, v| acc * v.states.len() + w[&v.name])
    }

    /// Every combination of states for the named variables.
    fn product(&self, names: &[String]) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for n in names {
            let mut next = Vec::new();
            for prefix in &out {
                for s in 0..self.cards[n] {
                    let mut v = prefix.clone();
                    v.push(s);
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    fn joint(&self, w: &World, mode: RespondentMode) -> f64 {
        let c = &self.spec.cpts;
        let mut p = c.latent.table[self.row(&c.latent.parents, w)][self.x_col(w)];
        let a = w[&self.spec.treatment];
        p *= match mode {
            RespondentMode::Abductive => c.treatment.table[self.row(&c.treatment.parents, w)][a],
            RespondentMode::Randomized => 0.5,
        };
        p *= c.outcome.table[self.row(&c.outcome.parents, w)][w[&self.spec.outcome.name]];
        for (v, t) in self.spec.z_vars.iter().zip(&c.negative_controls) {
            p *= t.table[self.row(&t.parents, w)][w[&v.name]];
        }
        for (v, t) in self.spec.lprime_vars.iter().zip(&c.confounders) {
            p *= t.table[self.row(&t.parents, w)][w[&v.name]];
        }
        p
    }

    /// Sums the joint over every world consistent with the evidence and calls
    /// `f(world, weight)`.
    fn enumerate(&self, l: &Assignment, evidence: &World, mode: RespondentMode, mut f: impl FnMut(&World, f64)) {
        let mut free: Vec<String> = self.spec.x_vars.iter().map(|v| v.name.clone()).collect();
        free.push(self.spec.treatment.clone());
        free.push(self.spec.outcome.name.clone());
        free.extend(self.spec.z_vars.iter().map(|v| v.name.clone()));
        free.extend(self.spec.lprime_vars.iter().map(|v| v.name.clone()));
        free.retain(|n| !evidence.contains_key(n));
        let mut base: World = evidence.clone();
        for v in &self.spec.l_vars {
            base.insert(v.name.clone(), self.state(&v.name, &l[&v.name]));
        }
        for combo in self.product(&free) {
            let mut w = base.clone();
            for (n, s) in free.iter().zip(combo) {
                w.insert(n.clone(), s);
            }
            let p = self.joint(&w, mode);
            f(&w, p);
        }
    }

    fn evidence(&self, arm: Option<usize>, assigned: &Assignment) -> World {
        let mut e: World = assigned.iter().map(|(k, v)| (k.clone(), self.state(k, v))).collect();
        if let Some(a) = arm {
            e.insert(self.spec.treatment.clone(), a);
        }
        e
    }

    /// `P(variable | A = arm, L' = assigned, l)` by enumeration.
    pub fn conditional(&self, l: &Assignment, arm: Option<usize>, assigned: &Assignment, variable: &str, mode: RespondentMode) -> Vec<f64> {
        let mut out = vec![0.0; self.cards[variable]];
        self.enumerate(l, &self.evidence(arm, assigned), mode, |w, p| out[w[variable]] += p);
        let total: f64 = out.iter().sum();
        out.iter().map(|v| v / total).collect()
    }

    /// Posterior over joint latent states, columns in declared order.
    pub fn posterior(&self, l: &Assignment, arm: Option<usize>, assigned: &Assignment, mode: RespondentMode) -> Vec<f64> {
        let nx: usize = self.spec.x_vars.iter().map(|v| v.states.len()).product();
        let mut out = vec![0.0; nx];
        self.enumerate(l, &self.evidence(arm, assigned), mode, |w, p| out[self.x_col(w)] += p);
        let total: f64 = out.iter().sum();
        out.iter().map(|v| v / total).collect()
    }

    /// `E[Y | do(A = a), x]` averaged over `P(x | A = a', assigned, l)`.
    pub fn mu(&self, l: &Assignment, a: usize, conditioning: usize, assigned: &Assignment, mode: RespondentMode) -> f64 {
        let q = self.posterior(l, Some(conditioning), assigned, mode);
        let enc = self.spec.outcome.encoding();
        let c = &self.spec.cpts.outcome;
        let xnames: Vec<String> = self.spec.x_vars.iter().map(|v| v.name.clone()).collect();
        let mut total = 0.0;
        for (xi, combo) in self.product(&xnames).into_iter().enumerate() {
            let mut w: World = xnames.iter().cloned().zip(combo).collect();
            for v in &self.spec.l_vars {
                w.insert(v.name.clone(), self.state(&v.name, &l[&v.name]));
            }
            w.insert(self.spec.treatment.clone(), a);
            let row = &c.table[self.row(&c.parents, &w)];
            let ey: f64 = row.iter().zip(&enc).map(|(p, e)| p * e).sum();
            total += q[xi] * ey;
        }
        total
    }

    /// Prior-population effect: latents drawn from `P(x | l, assigned)`.
    pub fn tau_ate_prior(&self, l: &Assignment, assigned: &Assignment) -> f64 {
        let q = self.posterior(l, None, assigned, RespondentMode::Randomized);
        let enc = self.spec.outcome.encoding();
        let c = &self.spec.cpts.outcome;
        let xnames: Vec<String> = self.spec.x_vars.iter().map(|v| v.name.clone()).collect();
        let mut total = 0.0;
        for (xi, combo) in self.product(&xnames).into_iter().enumerate() {
            let mut w: World = xnames.iter().cloned().zip(combo).collect();
            for v in &self.spec.l_vars {
                w.insert(v.name.clone(), self.state(&v.name, &l[&v.name]));
            }
            let mut ey = [0.0; 2];
            for (a, slot) in ey.iter_mut().enumerate() {
                w.insert(self.spec.treatment.clone(), a);
                *slot = c.table[self.row(&c.parents, &w)].iter().zip(&enc).map(|(p, e)| p * e).sum();
            }
            total += q[xi] * (ey[1] - ey[0]);
        }
        total
    }

    /// Pooled TVD of the negative controls between arms.
    pub fn tvd(&self, l: &Assignment, assigned: &Assignment, mode: RespondentMode) -> f64 {
        self.spec
            .z_vars
            .iter()
            .map(|z| {
                let p1 = self.conditional(l, Some(1), assigned, &z.name, mode);
                let p0 = self.conditional(l, Some(0), assigned, &z.name, mode);
                0.5 * p1.iter().zip(&p0).map(|(a, b)| (a - b).abs()).sum::<f64>()
            })
            .sum()
    }
}

/// Observed variables set to their `i`-th joint configuration.
pub fn nth_persona(spec: &ScmSpec, mut i: usize) -> Assignment {
    let mut out = Assignment::new();
    for v in spec.l_vars.iter().rev() {
        out.insert(v.name.clone(), v.states[i % v.states.len()].clone());
        i /= v.states.len();
    }
    out
}

pub fn toy_persona() -> Assignment {
    [("sex".to_string(), "female".to_string())].into()
}

pub fn assign(pairs: &[(&str, &str)]) -> Assignment {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
