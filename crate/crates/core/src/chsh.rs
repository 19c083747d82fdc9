//! The CH form of the CHSH functional and everything evaluated on top of it.
//!
//! With outcome `0` as the "click" outcome,
//!
//! ```text
//! I = p(00|00) + p(00|01) + p(00|10) − p(00|11) − p_A(0|0) − p_B(0|0)  ≤ 0   (LHV)
//! ```
//!
//! Relabeling parties, settings and outcomes yields equivalent inequalities.
//! Two relabelings are treated as the same inequality when they agree on every
//! no-signaling table, which leaves 8 classes for two settings per party and
//! 72 for three. Members of one class share `I` but weigh different marginals,
//! so they disagree on the efficiency needed to close the detection loophole.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::ChshError;
use crate::quantum::{
    joint_probability, marginal_probability, MeasurementDirection, NoisyState, Party, Projector,
};
use crate::TOL;

/// Tolerance on normalization and no-signaling sums.
pub const TABLE_TOL: f64 = 1e-10;

/// Outcome probabilities for `S` settings per party.
///
/// Indexed `joint[a][b][x][y]`, `marg_a[a][x]`, `marg_b[b][y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityTable<const S: usize = 2> {
    pub joint: [[[[f64; S]; S]; 2]; 2],
    pub marg_a: [[f64; S]; 2],
    pub marg_b: [[f64; S]; 2],
}

impl<const S: usize> ProbabilityTable<S> {
    pub const SETTINGS: usize = S;

    /// 0/1 table of a deterministic local strategy: party A answers
    /// `outcomes_a[x]` to setting `x`, party B likewise.
    pub fn deterministic(outcomes_a: [u8; S], outcomes_b: [u8; S]) -> Self {
        let mut t = Self {
            joint: [[[[0.0; S]; S]; 2]; 2],
            marg_a: [[0.0; S]; 2],
            marg_b: [[0.0; S]; 2],
        };
        for x in 0..S {
            t.marg_a[outcomes_a[x] as usize][x] = 1.0;
            t.marg_b[outcomes_b[x] as usize][x] = 1.0;
            for y in 0..S {
                t.joint[outcomes_a[x] as usize][outcomes_b[y] as usize][x][y] = 1.0;
            }
        }
        t
    }

    /// Checks range, normalization and no-signaling.
    pub fn validate(&self) -> Result<(), ChshError> {
        let in_range = |p: f64| (-TOL..=1.0 + TOL).contains(&p);
        for x in 0..S {
            for y in 0..S {
                let mut total = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        let p = self.joint[a][b][x][y];
                        if !in_range(p) {
                            return Err(ChshError::Inconsistent(format!(
                                "p({a}{b}|{x}{y}) = {p} outside [0, 1]"
                            )));
                        }
                        total += p;
                    }
                }
                if (total - 1.0).abs() > TABLE_TOL {
                    return Err(ChshError::Inconsistent(format!(
                        "outcomes for settings ({x},{y}) sum to {total}"
                    )));
                }
            }
        }
        for m in self.marg_a.iter().chain(&self.marg_b).flatten() {
            if !in_range(*m) {
                return Err(ChshError::Inconsistent(format!("marginal {m} outside [0, 1]")));
            }
        }
        self.check_no_signaling()
    }

    fn check_no_signaling(&self) -> Result<(), ChshError> {
        for x in 0..S {
            for y in 0..S {
                for o in 0..2 {
                    let row_a = self.joint[o][0][x][y] + self.joint[o][1][x][y];
                    let row_b = self.joint[0][o][x][y] + self.joint[1][o][x][y];
                    if (row_a - self.marg_a[o][x]).abs() > TABLE_TOL {
                        return Err(ChshError::Inconsistent(format!(
                            "sum_b p({o}b|{x}{y}) = {row_a} but p_A({o}|{x}) = {}",
                            self.marg_a[o][x]
                        )));
                    }
                    if (row_b - self.marg_b[o][y]).abs() > TABLE_TOL {
                        return Err(ChshError::Inconsistent(format!(
                            "sum_a p(a{o}|{x}{y}) = {row_b} but p_B({o}|{y}) = {}",
                            self.marg_b[o][y]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Quantum table for measurement axes `a_dirs` (Alice) and `b_dirs` (Bob).
///
/// Outcome 0 of setting `x` is the projector onto the +1 eigenstate of
/// `a_dirs[x]·σ`, outcome 1 its complement.
pub fn build_probability_table<const S: usize>(
    state: &NoisyState,
    a_dirs: &[MeasurementDirection; S],
    b_dirs: &[MeasurementDirection; S],
) -> Result<ProbabilityTable<S>, ChshError> {
    let outcome_projectors = |d: &MeasurementDirection| {
        let p = Projector::from_direction(d);
        [p, p.complement()]
    };
    let pa = a_dirs.map(|d| outcome_projectors(&d));
    let pb = b_dirs.map(|d| outcome_projectors(&d));

    let mut t = ProbabilityTable {
        joint: [[[[0.0; S]; S]; 2]; 2],
        marg_a: [[0.0; S]; 2],
        marg_b: [[0.0; S]; 2],
    };
    for x in 0..S {
        for o in 0..2 {
            t.marg_a[o][x] = marginal_probability(state, &pa[x][o], Party::A)?;
            t.marg_b[o][x] = marginal_probability(state, &pb[x][o], Party::B)?;
        }
    }
    for x in 0..S {
        for y in 0..S {
            for a in 0..2 {
                for b in 0..2 {
                    t.joint[a][b][x][y] = joint_probability(state, &pa[x][a], &pb[y][b])?;
                }
            }
        }
    }
    t.check_no_signaling()?;
    Ok(t)
}

/// One relabeling of the CH functional.
///
/// Relabeled slot `x` of Alice reads original setting `settings_a[x]` with
/// its outcomes flipped when `flip_a[x]` is set; likewise for Bob. With
/// `party_swap` the parties trade places before the rest is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChForm {
    pub party_swap: bool,
    pub settings_a: [u8; 2],
    pub settings_b: [u8; 2],
    pub flip_a: [bool; 2],
    pub flip_b: [bool; 2],
}

impl Default for ChForm {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl ChForm {
    pub const IDENTITY: Self = Self {
        party_swap: false,
        settings_a: [0, 1],
        settings_b: [0, 1],
        flip_a: [false, false],
        flip_b: [false, false],
    };

    fn highest_setting(&self) -> usize {
        self.settings_a.iter().chain(&self.settings_b).copied().max().unwrap_or(0) as usize
    }

    fn check_fits(&self, settings: usize) -> Result<(), ChshError> {
        let setting = self.highest_setting();
        if setting >= settings {
            return Err(ChshError::SettingOutOfRange {
                setting,
                available: settings,
            });
        }
        Ok(())
    }

    /// Resolves each relabeled entry used by the functional to a source entry.
    fn compile(&self) -> Compiled {
        let (sa, sb, fa, fb) = (self.settings_a, self.settings_b, self.flip_a, self.flip_b);
        let mut joint = [JointRef::default(); 4];
        for (k, (x, y)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            let a = fa[x] as u8;
            let b = fb[y] as u8;
            joint[k] = if self.party_swap {
                JointRef { a: b, b: a, x: sb[y], y: sa[x] }
            } else {
                JointRef { a, b, x: sa[x], y: sb[y] }
            };
        }
        let alice = MargRef {
            from_a: !self.party_swap,
            outcome: fa[0] as u8,
            setting: sa[0],
        };
        let bob = MargRef {
            from_a: self.party_swap,
            outcome: fb[0] as u8,
            setting: sb[0],
        };
        Compiled {
            joint,
            marg: [alice, bob],
        }
    }

    /// The relabeled two-setting table.
    pub fn apply<const S: usize>(
        &self,
        table: &ProbabilityTable<S>,
    ) -> Result<ProbabilityTable<2>, ChshError> {
        self.check_fits(S)?;
        let source_joint = |a: usize, b: usize, x: usize, y: usize| {
            if self.party_swap {
                table.joint[b][a][y][x]
            } else {
                table.joint[a][b][x][y]
            }
        };
        let (marg_a, marg_b) = if self.party_swap {
            (&table.marg_b, &table.marg_a)
        } else {
            (&table.marg_a, &table.marg_b)
        };
        let mut out = ProbabilityTable::<2> {
            joint: [[[[0.0; 2]; 2]; 2]; 2],
            marg_a: [[0.0; 2]; 2],
            marg_b: [[0.0; 2]; 2],
        };
        for x in 0..2 {
            let (sx, fx) = (self.settings_a[x] as usize, self.flip_a[x] as usize);
            for o in 0..2 {
                out.marg_a[o][x] = marg_a[o ^ fx][sx];
            }
            for y in 0..2 {
                let (sy, fy) = (self.settings_b[y] as usize, self.flip_b[y] as usize);
                for a in 0..2 {
                    for b in 0..2 {
                        out.joint[a][b][x][y] = source_joint(a ^ fx, b ^ fy, sx, sy);
                    }
                }
            }
        }
        for y in 0..2 {
            let (sy, fy) = (self.settings_b[y] as usize, self.flip_b[y] as usize);
            for o in 0..2 {
                out.marg_b[o][y] = marg_b[o ^ fy][sy];
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct JointRef {
    a: u8,
    b: u8,
    x: u8,
    y: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MargRef {
    from_a: bool,
    outcome: u8,
    setting: u8,
}

/// A form resolved to source-table coordinates: the four joint entries of
/// `p(00|00), p(00|01), p(00|10), p(00|11)` and the two subtracted marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Compiled {
    joint: [JointRef; 4],
    marg: [MargRef; 2],
}

impl Compiled {
    /// `(p(00|00) + p(00|01) + p(00|10) − p(00|11), p_A(0|0) + p_B(0|0))`
    #[inline]
    fn terms<const S: usize>(&self, t: &ProbabilityTable<S>) -> (f64, f64) {
        let j = |r: JointRef| t.joint[r.a as usize][r.b as usize][r.x as usize][r.y as usize];
        let m = |r: MargRef| {
            let side = if r.from_a { &t.marg_a } else { &t.marg_b };
            side[r.outcome as usize][r.setting as usize]
        };
        let coincidences = j(self.joint[0]) + j(self.joint[1]) + j(self.joint[2]) - j(self.joint[3]);
        let singles = m(self.marg[0]) + m(self.marg[1]);
        (coincidences, singles)
    }

    #[inline]
    fn value<const S: usize>(&self, t: &ProbabilityTable<S>) -> f64 {
        let (coincidences, singles) = self.terms(t);
        coincidences - singles
    }

    /// Required efficiency if this form is violated beyond `TOL`.
    #[inline]
    fn required_efficiency<const S: usize>(&self, t: &ProbabilityTable<S>) -> Option<(f64, f64)> {
        let (coincidences, singles) = self.terms(t);
        let value = coincidences - singles;
        (value > TOL).then(|| (value, singles / coincidences))
    }

    /// Integer coefficients (scaled by 4) of the functional in the
    /// no-signaling coordinates `(1, ⟨A_x⟩, ⟨B_y⟩, ⟨A_x B_y⟩)`.
    fn correlator_key(&self, settings: usize) -> Vec<i32> {
        let a_off = 1;
        let b_off = a_off + settings;
        let e_off = b_off + settings;
        let mut key = vec![0i32; e_off + settings * settings];
        let sign = |o: u8| if o == 0 { 1 } else { -1 };
        for (k, r) in self.joint.iter().enumerate() {
            let c = if k == 3 { -1 } else { 1 };
            let (sa, sb) = (sign(r.a), sign(r.b));
            key[0] += c;
            key[a_off + r.x as usize] += c * sa;
            key[b_off + r.y as usize] += c * sb;
            key[e_off + r.x as usize * settings + r.y as usize] += c * sa * sb;
        }
        for r in &self.marg {
            let off = if r.from_a { a_off } else { b_off };
            key[0] -= 2;
            key[off + r.setting as usize] -= 2 * sign(r.outcome);
        }
        key
    }

    /// Integer coefficients over the raw joint and marginal entries.
    fn raw_key(&self, settings: usize) -> Vec<i32> {
        let s2 = settings * settings;
        let marg_off = 4 * s2;
        let mut key = vec![0i32; marg_off + 4 * settings];
        for (k, r) in self.joint.iter().enumerate() {
            let idx = (r.a as usize * 2 + r.b as usize) * s2 + r.x as usize * settings + r.y as usize;
            key[idx] += if k == 3 { -1 } else { 1 };
        }
        for r in &self.marg {
            let side = if r.from_a { 0 } else { 2 * settings };
            key[marg_off + side + r.outcome as usize * settings + r.setting as usize] -= 1;
        }
        key
    }
}

/// Relabelings that induce the same functional on no-signaling tables.
///
/// `variants[0]` is the first one produced by the enumeration and serves as
/// the class representative. The variants differ only in which marginals they
/// subtract, i.e. in which outcome absorbs the undetected events.
#[derive(Debug, Clone)]
pub struct FormClass {
    variants: Vec<ChForm>,
    compiled: Vec<Compiled>,
}

impl FormClass {
    pub fn representative(&self) -> ChForm {
        self.variants[0]
    }

    pub fn variants(&self) -> &[ChForm] {
        &self.variants
    }
}

/// All inequivalent CH forms for a given number of settings per party.
#[derive(Debug, Clone)]
pub struct FormSet {
    settings: usize,
    classes: Vec<FormClass>,
}

impl FormSet {
    pub fn new(settings: usize) -> Result<Self, ChshError> {
        if !(2..=3).contains(&settings) {
            return Err(ChshError::UnsupportedSettings(settings));
        }
        let ordered_pairs: Vec<[u8; 2]> = (0..settings as u8)
            .flat_map(|i| (0..settings as u8).filter(move |&j| j != i).map(move |j| [i, j]))
            .collect();
        let flips = [[false, false], [true, false], [false, true], [true, true]];

        let mut classes: Vec<FormClass> = Vec::new();
        let mut class_of: HashMap<Vec<i32>, usize> = HashMap::new();
        let mut seen_raw: HashMap<Vec<i32>, ()> = HashMap::new();
        for party_swap in [false, true] {
            for &settings_a in &ordered_pairs {
                for &settings_b in &ordered_pairs {
                    for flip_a in flips {
                        for flip_b in flips {
                            let form = ChForm {
                                party_swap,
                                settings_a,
                                settings_b,
                                flip_a,
                                flip_b,
                            };
                            let compiled = form.compile();
                            if seen_raw.insert(compiled.raw_key(settings), ()).is_some() {
                                continue;
                            }
                            let key = compiled.correlator_key(settings);
                            let next = classes.len();
                            let idx = *class_of.entry(key).or_insert(next);
                            if idx == next {
                                classes.push(FormClass {
                                    variants: Vec::new(),
                                    compiled: Vec::new(),
                                });
                            }
                            classes[idx].variants.push(form);
                            classes[idx].compiled.push(compiled);
                        }
                    }
                }
            }
        }
        Ok(Self { settings, classes })
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn classes(&self) -> &[FormClass] {
        &self.classes
    }

    pub fn representatives(&self) -> Vec<ChForm> {
        self.classes.iter().map(FormClass::representative).collect()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// One representative per inequivalent CH form: 8 for two settings per
/// party, 72 for three. The identity relabeling comes first.
pub fn enumerate_forms(settings: usize) -> Result<Vec<ChForm>, ChshError> {
    Ok(FormSet::new(settings)?.representatives())
}

/// The CH functional `I` evaluated on the table relabeled by `form`.
pub fn ch_value<const S: usize>(table: &ProbabilityTable<S>, form: &ChForm) -> Result<f64, ChshError> {
    form.check_fits(S)?;
    Ok(form.compile().value(table))
}

/// `(p_A(0|0) + p_B(0|0)) / (p(00|00) + p(00|01) + p(00|10) − p(00|11))` on
/// the relabeled table; only defined when the form is violated.
pub fn eta_req<const S: usize>(table: &ProbabilityTable<S>, form: &ChForm) -> Result<f64, ChshError> {
    form.check_fits(S)?;
    let (coincidences, singles) = form.compile().terms(table);
    let i_value = coincidences - singles;
    if !(i_value > 0.0 && coincidences > 0.0) {
        return Err(ChshError::NoViolation { i_value });
    }
    Ok(singles / coincidences)
}

/// The CH value seen with detection efficiency `eta` on every detector, with
/// undetected particles counted as outcome 1.
///
/// `η²·I⁽²⁾ + η(1−η)·(I⁽¹ᴬ⁾ + I⁽¹ᴮ⁾) + (1−η)²·I⁽⁰⁾` where a lone detection
/// keeps only its own marginal (`I⁽¹ᴬ⁾ = −p_A(0|0)`) and no detection gives 0.
pub fn efficiency_corrected_value<const S: usize>(
    table: &ProbabilityTable<S>,
    form: &ChForm,
    eta: f64,
) -> Result<f64, ChshError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(ChshError::EfficiencyDomain(eta));
    }
    form.check_fits(S)?;
    let compiled = form.compile();
    let both = compiled.value(table);
    let m = |r: MargRef| {
        let side = if r.from_a { &table.marg_a } else { &table.marg_b };
        side[r.outcome as usize][r.setting as usize]
    };
    let only_a = -m(compiled.marg[0]);
    let only_b = -m(compiled.marg[1]);
    let neither = 0.0;
    Ok(eta * eta * both + eta * (1.0 - eta) * (only_a + only_b) + (1.0 - eta) * (1.0 - eta) * neither)
}

/// Which violated form decides the required efficiency of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// The form with the largest `I`.
    #[default]
    MaxI,
    /// The violated form with the smallest required efficiency.
    MinEta,
}

/// Winning form of a table, with its value and required efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub i_value: f64,
    pub form: ChForm,
    /// Present iff `i_value > TOL`, and then inside `(0, 1)`.
    pub eta_req: Option<f64>,
}

/// [`select_violation`] with ties resolved to the lowest index.
pub fn max_violation<const S: usize>(
    table: &ProbabilityTable<S>,
    forms: &FormSet,
    policy: SelectionPolicy,
) -> Result<ViolationRecord, ChshError> {
    select_violation(table, forms, policy, 0.0)
}

/// Picks the winning form of `table` among `forms`.
///
/// Under [`SelectionPolicy::MaxI`] the class with the largest `I` wins (lowest
/// class index on ties). Its variants are exactly tied in `I`, so
/// `variant_draw ∈ [0, 1)` chooses which of them supplies the required
/// efficiency: variant `⌊draw·n⌋`. A draw of 0 picks the representative.
///
/// Under [`SelectionPolicy::MinEta`] every violated variant of every class is
/// considered and the smallest required efficiency wins.
pub fn select_violation<const S: usize>(
    table: &ProbabilityTable<S>,
    forms: &FormSet,
    policy: SelectionPolicy,
    variant_draw: f64,
) -> Result<ViolationRecord, ChshError> {
    if forms.settings != S {
        return Err(ChshError::SettingOutOfRange {
            setting: forms.settings - 1,
            available: S,
        });
    }
    let mut best_class = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (idx, class) in forms.classes.iter().enumerate() {
        let value = class.compiled[0].value(table);
        if value > best_value {
            best_value = value;
            best_class = idx;
        }
    }

    if policy == SelectionPolicy::MinEta {
        let mut best: Option<ViolationRecord> = None;
        for class in &forms.classes {
            let value = class.compiled[0].value(table);
            if value.is_nan() || value <= TOL {
                continue;
            }
            for (form, compiled) in class.variants.iter().zip(&class.compiled) {
                if let Some((value, eta)) = compiled.required_efficiency(table) {
                    if best.is_none_or(|b| eta < b.eta_req.unwrap_or(f64::INFINITY)) {
                        best = Some(ViolationRecord {
                            i_value: value,
                            form: *form,
                            eta_req: Some(eta),
                        });
                    }
                }
            }
        }
        if let Some(record) = best {
            return Ok(record);
        }
    }

    let class = &forms.classes[best_class];
    let n = class.variants.len();
    let pick = ((variant_draw * n as f64) as usize).min(n - 1);
    let compiled = &class.compiled[pick];
    let i_value = compiled.value(table);
    Ok(ViolationRecord {
        i_value,
        form: class.variants[pick],
        eta_req: compiled.required_efficiency(table).map(|(_, eta)| eta),
    })
}

/// Largest CH value reached by any deterministic local strategy under any of
/// `forms`. The LHV bound says this is 0.
pub fn lhv_brute_force_bound(settings: usize, forms: &[ChForm]) -> Result<f64, ChshError> {
    match settings {
        2 => lhv_bound_for::<2>(forms),
        3 => lhv_bound_for::<3>(forms),
        other => Err(ChshError::UnsupportedSettings(other)),
    }
}

fn lhv_bound_for<const S: usize>(forms: &[ChForm]) -> Result<f64, ChshError> {
    let strategies = 1u32 << S;
    let decode = |bits: u32| std::array::from_fn::<u8, S, _>(|x| ((bits >> x) & 1) as u8);
    let mut best = f64::NEG_INFINITY;
    for sa in 0..strategies {
        for sb in 0..strategies {
            let table = ProbabilityTable::<S>::deterministic(decode(sa), decode(sb));
            for form in forms {
                best = best.max(ch_value(&table, form)?);
            }
        }
    }
    Ok(best)
}
