//! Deciding whether a constraint system has a solution inside a finite
//! parameter box.
//!
//! Three stages, cheapest first: contradictions between constraints that
//! share their non-constant part, interval evaluation over the box, and a
//! witness search. Variables of degree one that never share a constraint
//! with another such variable are solved exactly once the others are
//! fixed; the rest are enumerated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::constraint::{Constraint, Rel, Relation};
use super::poly::{Poly, Rat};
use super::AlgebraError;

/// Integer bounds per parameter, plus the parameters that range over the
/// rationals (performance parameters) and are only bounded by constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamBox {
    pub ints: BTreeMap<String, (i64, i64)>,
    pub reals: BTreeSet<String>,
}

impl ParamBox {
    pub fn new() -> ParamBox {
        ParamBox::default()
    }

    pub fn with(mut self, name: &str, lo: i64, hi: i64) -> ParamBox {
        self.ints.insert(name.to_string(), (lo, hi));
        self
    }

    pub fn with_real(mut self, name: &str) -> ParamBox {
        self.reals.insert(name.to_string());
        self
    }

    /// Number of integer points, saturating.
    pub fn size(&self) -> u128 {
        self.ints.values().fold(1u128, |acc, (lo, hi)| {
            acc.saturating_mul((hi - lo + 1).max(0) as u128)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    IntervalContradiction,
    PairwiseContradiction,
    ExhaustedBox,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::IntervalContradiction => "interval-contradiction",
            Reason::PairwiseContradiction => "pairwise-contradiction",
            Reason::ExhaustedBox => "exhausted-box",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Consistent(BTreeMap<String, Rat>),
    Inconsistent(Reason),
    Unknown { explored: u64 },
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Verdict::Consistent(_))
    }

    pub fn is_inconsistent(&self) -> bool {
        matches!(self, Verdict::Inconsistent(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Maximum number of search nodes before giving up with `Unknown`.
    pub budget: u64,
    pub random_samples: u64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 2_000_000,
            random_samples: 256,
            seed: 0x5eed,
        }
    }
}

pub fn check_consistency(
    cs: &[Constraint],
    bx: &ParamBox,
    cfg: &SearchConfig,
) -> Result<Verdict, AlgebraError> {
    let mut vars: BTreeSet<String> = BTreeSet::new();
    for c in cs {
        vars.extend(c.vars());
    }
    for (n, (lo, hi)) in &bx.ints {
        if lo > hi || *lo < 0 {
            return Err(AlgebraError::InvalidBox(n.clone()));
        }
    }
    for v in &vars {
        if !bx.ints.contains_key(v) && !bx.reals.contains(v) {
            return Err(AlgebraError::UnboundedVariable(v.clone()));
        }
    }

    for c in cs {
        if let Some(k) = c.poly().as_constant() {
            if !c.rel().holds(&k) {
                return Ok(Verdict::Inconsistent(Reason::IntervalContradiction));
            }
        }
    }
    if pairwise_contradiction(cs, bx) {
        return Ok(Verdict::Inconsistent(Reason::PairwiseContradiction));
    }

    let mut s = Search::new(cs, bx, &vars)?;
    if !s.tighten_unary() {
        return Ok(Verdict::Inconsistent(Reason::IntervalContradiction));
    }
    for i in 0..s.cons.len() {
        if s.cons[i].has_real {
            continue;
        }
        if s.violated(i) {
            return Ok(Verdict::Inconsistent(Reason::IntervalContradiction));
        }
    }
    Ok(s.run(cfg, bx))
}

/// Bound on a normalized non-constant part `q`, as integers when `q` is
/// integer-valued.
#[derive(Default)]
struct QBounds {
    lo: Option<(Rat, bool)>,
    hi: Option<(Rat, bool)>,
}

fn pairwise_contradiction(cs: &[Constraint], bx: &ParamBox) -> bool {
    let mut groups: BTreeMap<String, (Poly, bool, QBounds)> = BTreeMap::new();
    for c in cs {
        let q = c.poly().non_constant();
        if q.is_zero() {
            continue;
        }
        let k = c.poly().constant_term();
        let (l, g) = q.content();
        let mut scale = Rat::new(l, g);
        if q.sorted_terms(&[]).first().is_some_and(|(_, c)| c.is_negative()) {
            scale = -scale;
        }
        let qn = q.scale(&scale);
        // q + k rel 0  <=>  qn rel' -k*scale, direction flips with the sign
        let rhs = -(k * &scale);
        let integral = qn.vars().iter().all(|v| !bx.reals.contains(v));
        let key = qn.to_string();
        let entry = groups
            .entry(key)
            .or_insert_with(|| (qn.clone(), integral, QBounds::default()));
        let upper = scale.is_positive();
        let strict = c.rel() == Rel::Lt;
        let mut add = |is_upper: bool| {
            let slot = if is_upper { &mut entry.2.hi } else { &mut entry.2.lo };
            let b = (rhs.clone(), strict);
            let tighter = match slot {
                None => true,
                Some((v, s)) => {
                    if is_upper {
                        b.0 < *v || (b.0 == *v && strict && !*s)
                    } else {
                        b.0 > *v || (b.0 == *v && strict && !*s)
                    }
                }
            };
            if tighter {
                *slot = Some(b);
            }
        };
        match c.rel() {
            Rel::Eq => {
                add(true);
                add(false);
            }
            _ => add(upper),
        }
    }
    for (_, integral, b) in groups.values() {
        let (Some((lo, ls)), Some((hi, hs))) = (&b.lo, &b.hi) else {
            continue;
        };
        if *integral {
            let lo_i = if *ls { lo.floor() + Rat::one() } else { lo.ceil() };
            let hi_i = if *hs { hi.ceil() - Rat::one() } else { hi.floor() };
            if lo_i > hi_i {
                return true;
            }
        } else if lo > hi || (lo == hi && (*ls || *hs)) {
            return true;
        }
    }
    false
}

struct Term {
    coef: i128,
    factors: Vec<(usize, u32)>,
}

struct Compiled {
    terms: Vec<Term>,
    /// Coefficients did not fit machine integers.
    big: bool,
    has_real: bool,
    rel: Rel,
    poly: Poly,
    vars: Vec<usize>,
}

fn compile(c: &Constraint, index: &BTreeMap<String, usize>, real: &[bool]) -> Compiled {
    let mut big = false;
    let terms = c
        .poly()
        .terms()
        .map(|(m, k)| {
            let coef = k.to_integer().to_i128().unwrap_or_else(|| {
                big = true;
                0
            });
            Term {
                coef,
                factors: m.factors().iter().map(|(n, e)| (index[n], *e)).collect(),
            }
        })
        .collect();
    let vars: Vec<usize> = c.vars().iter().map(|n| index[n]).collect();
    Compiled {
        terms,
        big,
        has_real: vars.iter().any(|&v| real[v]),
        rel: c.rel(),
        poly: c.poly().clone(),
        vars,
    }
}

struct Search<'a> {
    names: Vec<String>,
    real: Vec<bool>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    cons: Vec<Compiled>,
    src: &'a [Constraint],
    /// Assigned integer values, meaningful where `set` is true.
    val: Vec<i64>,
    set: Vec<bool>,
    explored: u64,
}

enum Outcome {
    Found(BTreeMap<usize, Rat>),
    Exhausted,
    OutOfBudget,
}

impl<'a> Search<'a> {
    fn new(cs: &'a [Constraint], bx: &ParamBox, vars: &BTreeSet<String>) -> Result<Self, AlgebraError> {
        let names: Vec<String> = vars.iter().cloned().collect();
        let index: BTreeMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let real: Vec<bool> = names.iter().map(|n| bx.reals.contains(n)).collect();
        let lo = names.iter().map(|n| bx.ints.get(n).map_or(0, |b| b.0)).collect();
        let hi = names.iter().map(|n| bx.ints.get(n).map_or(0, |b| b.1)).collect();
        let cons = cs.iter().map(|c| compile(c, &index, &real)).collect();
        let n = names.len();
        Ok(Search {
            names,
            real,
            lo,
            hi,
            cons,
            src: cs,
            val: vec![0; n],
            set: vec![false; n],
            explored: 0,
        })
    }

    /// Narrows integer bounds from constraints in a single integer variable
    /// of degree one. Returns false when a domain becomes empty.
    fn tighten_unary(&mut self) -> bool {
        for c in &self.cons {
            if c.vars.len() != 1 || c.has_real || c.poly.degree() != 1 {
                continue;
            }
            let v = c.vars[0];
            let (a, rest) = c.poly.linear_in(&self.names[v]).unwrap();
            let a = a.constant_term();
            let b = rest.constant_term();
            // a*x + b rel 0
            let t = -b / &a;
            let (mut lo, mut hi) = (self.lo[v], self.hi[v]);
            let strict = c.rel == Rel::Lt;
            let up = |t: &Rat| to_i64_clamped(if strict { t.ceil() - Rat::one() } else { t.floor() });
            let down = |t: &Rat| to_i64_clamped(if strict { t.floor() + Rat::one() } else { t.ceil() });
            match c.rel {
                Rel::Eq => {
                    if !t.is_integer() {
                        return false;
                    }
                    let x = to_i64_clamped(t.clone());
                    lo = lo.max(x);
                    hi = hi.min(x);
                }
                _ if a.is_positive() => hi = hi.min(up(&t)),
                _ => lo = lo.max(down(&t)),
            }
            if lo > hi {
                return false;
            }
            self.lo[v] = lo;
            self.hi[v] = hi;
        }
        true
    }

    fn interval(&self, v: usize) -> (i64, i64) {
        if self.set[v] {
            (self.val[v], self.val[v])
        } else {
            (self.lo[v], self.hi[v])
        }
    }

    /// True when constraint `i` fails for every completion of the current
    /// partial assignment, judged by interval arithmetic.
    fn violated(&self, i: usize) -> bool {
        let c = &self.cons[i];
        if c.big || c.has_real {
            return false;
        }
        let mut min: i128 = 0;
        let mut max: i128 = 0;
        for t in &c.terms {
            let mut plo: i128 = 1;
            let mut phi: i128 = 1;
            for &(v, e) in &t.factors {
                let (a, b) = self.interval(v);
                for _ in 0..e {
                    let (Some(x), Some(y)) = (plo.checked_mul(a as i128), phi.checked_mul(b as i128)) else {
                        return false;
                    };
                    plo = x;
                    phi = y;
                }
            }
            let (Some(x), Some(y)) = (t.coef.checked_mul(plo), t.coef.checked_mul(phi)) else {
                return false;
            };
            let (x, y) = if t.coef >= 0 { (x, y) } else { (y, x) };
            let (Some(m), Some(n)) = (min.checked_add(x), max.checked_add(y)) else {
                return false;
            };
            min = m;
            max = n;
        }
        match c.rel {
            Rel::Le => min > 0,
            Rel::Lt => min >= 0,
            Rel::Eq => min > 0 || max < 0,
        }
    }

    /// Value of constraint `i` with every variable assigned (reals taken
    /// from `reals`).
    fn value(&self, i: usize, reals: &BTreeMap<usize, Rat>) -> Rat {
        let c = &self.cons[i];
        if !c.big && !c.has_real {
            let mut sum: Option<i128> = Some(0);
            for t in &c.terms {
                let mut p = Some(t.coef);
                for &(v, e) in &t.factors {
                    for _ in 0..e {
                        p = p.and_then(|p| p.checked_mul(self.val[v] as i128));
                    }
                }
                sum = sum.zip(p).and_then(|(s, p)| s.checked_add(p));
            }
            if let Some(s) = sum {
                return Rat::from_integer(BigInt::from(s));
            }
        }
        let env = self.env(reals);
        c.poly.eval(&env).expect("all variables assigned")
    }

    fn env(&self, reals: &BTreeMap<usize, Rat>) -> BTreeMap<String, Rat> {
        self.names
            .iter()
            .enumerate()
            .filter(|(v, _)| self.set[*v] || reals.contains_key(v))
            .map(|(v, n)| {
                let x = reals
                    .get(&v)
                    .cloned()
                    .unwrap_or_else(|| Rat::from_integer(BigInt::from(self.val[v])));
                (n.clone(), x)
            })
            .collect()
    }

    /// Splits variables into solved and enumerated ones.
    fn plan(&self) -> Result<(Vec<usize>, Vec<usize>), AlgebraError> {
        let n = self.names.len();
        let linear = |v: usize| {
            self.cons
                .iter()
                .filter(|c| c.vars.contains(&v))
                .all(|c| c.poly.degree_in(&self.names[v]) == 1)
        };
        let mut cands: Vec<usize> = (0..n).filter(|&v| linear(v)).collect();
        // reals first, then the widest integer domains
        cands.sort_by_key(|&v| (!self.real[v], std::cmp::Reverse(self.hi[v] - self.lo[v]), v));
        let mut solved: Vec<usize> = Vec::new();
        for v in cands {
            let clash = self
                .cons
                .iter()
                .any(|c| c.vars.contains(&v) && c.vars.iter().any(|w| solved.contains(w)));
            if !clash {
                solved.push(v);
            }
        }
        for v in 0..n {
            if self.real[v] && !solved.contains(&v) {
                return Err(AlgebraError::Unsupported(format!(
                    "rational parameter `{}` must occur linearly and apart from other rational parameters",
                    self.names[v]
                )));
            }
        }
        let mut enumerated: Vec<usize> = (0..n).filter(|v| !solved.contains(v)).collect();
        enumerated.sort_by_key(|&v| (self.hi[v] - self.lo[v], v));
        Ok((solved, enumerated))
    }

    /// With every enumerated variable fixed, picks values for the solved
    /// ones and checks the remaining constraints.
    fn complete(&mut self, solved: &[usize]) -> Option<BTreeMap<usize, Rat>> {
        for i in 0..self.cons.len() {
            if self.cons[i].vars.iter().all(|v| !solved.contains(v))
                && !self.cons[i].rel.holds(&self.value(i, &BTreeMap::new()))
            {
                return None;
            }
        }
        let mut reals = BTreeMap::new();
        for &v in solved {
            let name = &self.names[v];
            let mut lo: Option<(Rat, bool)> = None;
            let mut hi: Option<(Rat, bool)> = None;
            if !self.real[v] {
                lo = Some((Rat::from_integer(self.lo[v].into()), false));
                hi = Some((Rat::from_integer(self.hi[v].into()), false));
            }
            let env = self.env(&BTreeMap::new());
            for i in 0..self.cons.len() {
                if !self.cons[i].vars.contains(&v) {
                    continue;
                }
                let (a, rest) = self.cons[i].poly.linear_in(name).unwrap();
                let a = a.eval(&env).expect("others assigned");
                let r = rest.eval(&env).expect("others assigned");
                if a.is_zero() {
                    if !self.cons[i].rel.holds(&r) {
                        return None;
                    }
                    continue;
                }
                let t = -r / &a;
                let strict = self.cons[i].rel == Rel::Lt;
                let tighten_hi = |hi: &mut Option<(Rat, bool)>, t: &Rat| {
                    if hi.as_ref().is_none_or(|(h, s)| t < h || (t == h && strict && !s)) {
                        *hi = Some((t.clone(), strict));
                    }
                };
                let tighten_lo = |lo: &mut Option<(Rat, bool)>, t: &Rat| {
                    if lo.as_ref().is_none_or(|(l, s)| t > l || (t == l && strict && !s)) {
                        *lo = Some((t.clone(), strict));
                    }
                };
                match self.cons[i].rel {
                    Rel::Eq => {
                        tighten_hi(&mut hi, &t);
                        tighten_lo(&mut lo, &t);
                    }
                    _ if a.is_positive() => tighten_hi(&mut hi, &t),
                    _ => tighten_lo(&mut lo, &t),
                }
            }
            if self.real[v] {
                let x = pick_rational(&lo, &hi)?;
                reals.insert(v, x);
            } else {
                let l = lo.map(|(l, s)| if s { l.floor() + Rat::one() } else { l.ceil() }).unwrap();
                let h = hi.map(|(h, s)| if s { h.ceil() - Rat::one() } else { h.floor() }).unwrap();
                if l > h {
                    return None;
                }
                self.val[v] = to_i64_clamped(l);
                self.set[v] = true;
            }
        }
        Some(reals)
    }

    fn witness(&self, reals: &BTreeMap<usize, Rat>, bx: &ParamBox) -> BTreeMap<String, Rat> {
        let mut w: BTreeMap<String, Rat> = bx
            .ints
            .iter()
            .map(|(n, (lo, _))| (n.clone(), Rat::from_integer((*lo).into())))
            .collect();
        w.extend(self.env(reals));
        w
    }

    fn sound(&self, w: &BTreeMap<String, Rat>) -> bool {
        self.src.iter().all(|c| c.holds(w).unwrap_or(false))
    }

    /// Pairs each lower bound of a solved variable with each of its upper
    /// bounds (the box included for integers). The results no longer mention the
    /// variable and only serve to prune the enumeration.
    fn add_shadows(&mut self, solved: &[usize]) {
        let index: BTreeMap<String, usize> =
            self.names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut extra = Vec::new();
        for &v in solved {
            let name = &self.names[v];
            let (mut lows, mut highs) = (Vec::new(), Vec::new());
            if !self.real[v] {
                lows.push((Poly::int(self.lo[v]), false));
                highs.push((Poly::int(self.hi[v]), false));
            }
            for c in self.cons.iter().filter(|c| c.vars.contains(&v)) {
                let (a, rest) = c.poly.linear_in(name).expect("solved variables are linear");
                let Some(a) = a.as_constant() else { continue };
                let t = rest.scale(&(-Rat::one() / &a));
                let strict = c.rel == Rel::Lt;
                match c.rel {
                    Rel::Eq => {
                        lows.push((t.clone(), false));
                        highs.push((t, false));
                    }
                    _ if a.is_positive() => highs.push((t, strict)),
                    _ => lows.push((t, strict)),
                }
            }
            for (l, ls) in &lows {
                for (h, hs) in &highs {
                    if l.is_constant() && h.is_constant() {
                        continue;
                    }
                    let rel = if *ls || *hs { Relation::Lt } else { Relation::Le };
                    extra.push(compile(&Constraint::new(l, rel, h), &index, &self.real));
                }
            }
        }
        self.cons.extend(extra);
    }

    fn run(&mut self, cfg: &SearchConfig, bx: &ParamBox) -> Verdict {
        let (solved, enumerated) = match self.plan() {
            Ok(p) => p,
            Err(_) => return Verdict::Unknown { explored: 0 },
        };
        self.add_shadows(&solved);
        if !self.tighten_unary() {
            return Verdict::Inconsistent(Reason::IntervalContradiction);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.random_samples {
            if self.explored >= cfg.budget {
                return Verdict::Unknown { explored: self.explored };
            }
            self.explored += 1;
            for &v in &enumerated {
                self.val[v] = rng.gen_range(self.lo[v]..=self.hi[v]);
                self.set[v] = true;
            }
            if let Some(reals) = self.complete(&solved) {
                let w = self.witness(&reals, bx);
                if self.sound(&w) {
                    return Verdict::Consistent(w);
                }
            }
            for &v in &solved {
                self.set[v] = false;
            }
        }
        for &v in &enumerated {
            self.set[v] = false;
        }
        match self.dfs(&enumerated, &solved, 0, cfg.budget) {
            Outcome::Found(reals) => Verdict::Consistent(self.witness(&reals, bx)),
            Outcome::Exhausted => Verdict::Inconsistent(Reason::ExhaustedBox),
            Outcome::OutOfBudget => Verdict::Unknown { explored: self.explored },
        }
    }

    fn dfs(&mut self, order: &[usize], solved: &[usize], depth: usize, budget: u64) -> Outcome {
        if depth == order.len() {
            if let Some(reals) = self.complete(solved) {
                let w = self.env(&reals);
                if self.src.iter().all(|c| c.holds(&w).unwrap_or(false)) {
                    return Outcome::Found(reals);
                }
            }
            for &v in solved {
                self.set[v] = false;
            }
            return Outcome::Exhausted;
        }
        let v = order[depth];
        let touching: Vec<usize> = (0..self.cons.len())
            .filter(|&i| self.cons[i].vars.contains(&v))
            .collect();
        for x in self.lo[v]..=self.hi[v] {
            if self.explored >= budget {
                self.set[v] = false;
                return Outcome::OutOfBudget;
            }
            self.explored += 1;
            self.val[v] = x;
            self.set[v] = true;
            if touching.iter().any(|&i| self.violated(i)) {
                continue;
            }
            match self.dfs(order, solved, depth + 1, budget) {
                Outcome::Exhausted => {}
                other => return other,
            }
        }
        self.set[v] = false;
        Outcome::Exhausted
    }
}

fn pick_rational(lo: &Option<(Rat, bool)>, hi: &Option<(Rat, bool)>) -> Option<Rat> {
    match (lo, hi) {
        (Some((l, ls)), Some((h, hs))) => {
            if l < h {
                if !ls {
                    Some(l.clone())
                } else if !hs {
                    Some(h.clone())
                } else {
                    Some((l + h) / Rat::from_integer(2.into()))
                }
            } else if l == h && !ls && !hs {
                Some(l.clone())
            } else {
                None
            }
        }
        (Some((l, s)), None) => Some(if *s { l + Rat::one() } else { l.clone() }),
        (None, Some((h, s))) => Some(if *s { h - Rat::one() } else { h.clone() }),
        (None, None) => Some(Rat::zero()),
    }
}

fn to_i64_clamped(r: BigRational) -> i64 {
    let i = r.to_integer();
    i.to_i64().unwrap_or(if i.is_negative() { i64::MIN } else { i64::MAX })
}
