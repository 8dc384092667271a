//! Linear threshold models and their determinization closed forms.

use crate::error::{FoilError, Result};
use crate::instance::{PartialInstance, Quad, Trit, UndeterminedInstance};

/// A perceptron `w · e >= t` over Boolean inputs. Ties classify positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Perceptron {
    pub weights: Vec<f64>,
    pub threshold: f64,
    /// Feature indices excluded from bias comparisons (0-based).
    pub protected: Vec<usize>,
}

impl Perceptron {
    pub fn new(weights: Vec<f64>, threshold: f64) -> Perceptron {
        assert!(!weights.is_empty(), "perceptron dimension must be at least 1");
        Perceptron { weights, threshold, protected: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn classify(&self, e: &PartialInstance) -> Result<bool> {
        if e.dim() != self.dim() {
            return Err(FoilError::DimensionMismatch(format!(
                "instance dimension {} vs model dimension {}",
                e.dim(),
                self.dim()
            )));
        }
        if !e.is_full() {
            return Err(FoilError::Unsupported(
                "perceptrons classify only full instances".into(),
            ));
        }
        let score: f64 = e
            .values()
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| if v == Trit::One { w } else { 0.0 })
            .sum();
        Ok(score >= self.threshold)
    }

    /// Is there a determinization of `u` all of whose completions are positive?
    /// Closed form: sum the defined contributions, `min(0, w)` over `?`
    /// components and `max(0, w)` over `◇` components, and compare with the
    /// threshold. The witness sets each `◇` component to 1 iff its weight is
    /// nonnegative.
    pub fn det_all_pos(&self, u: &UndeterminedInstance) -> Result<Option<PartialInstance>> {
        self.det_all_pos_restricted(&DomainInstance::from_undetermined(u)?)
    }

    /// Dual closed form: a determinization with all completions negative.
    /// The witness sets each `◇` component to 0 iff its weight is nonnegative.
    pub fn det_all_neg(&self, u: &UndeterminedInstance) -> Result<Option<PartialInstance>> {
        self.det_all_neg_restricted(&DomainInstance::from_undetermined(u)?)
    }

    /// `det_all_pos` generalized to per-component allowed sets.
    pub fn det_all_pos_restricted(&self, d: &DomainInstance) -> Result<Option<PartialInstance>> {
        if d.dim() != self.dim() {
            return Err(FoilError::DimensionMismatch(format!(
                "instance dimension {} vs model dimension {}",
                d.dim(),
                self.dim()
            )));
        }
        // Per component, the guaranteed (worst-completion) contribution of a
        // choice: 0 -> 0, 1 -> w, ? -> min(0, w). Maximize over the allowed set.
        let mut total = 0.0;
        let mut witness = Vec::with_capacity(self.dim());
        for (i, &w) in self.weights.iter().enumerate() {
            let (best, choice) = d
                .allowed(i)
                .map(|t| {
                    let c = match t {
                        Trit::Zero => 0.0,
                        Trit::One => w,
                        Trit::Bot => w.min(0.0),
                    };
                    (c, t)
                })
                .max_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .unwrap()
                        .then_with(|| rank_pos(a.1).cmp(&rank_pos(b.1)))
                })
                .expect("allowed sets are nonempty");
            total += best;
            witness.push(choice);
        }
        Ok((total >= self.threshold).then(|| PartialInstance::new(witness)))
    }

    /// `det_all_neg` generalized to per-component allowed sets.
    pub fn det_all_neg_restricted(&self, d: &DomainInstance) -> Result<Option<PartialInstance>> {
        if d.dim() != self.dim() {
            return Err(FoilError::DimensionMismatch(format!(
                "instance dimension {} vs model dimension {}",
                d.dim(),
                self.dim()
            )));
        }
        // Best-completion contribution of a choice: 0 -> 0, 1 -> w, ? -> max(0, w).
        // Minimize over the allowed set; all completions negative iff total < t.
        let mut total = 0.0;
        let mut witness = Vec::with_capacity(self.dim());
        for (i, &w) in self.weights.iter().enumerate() {
            let (best, choice) = d
                .allowed(i)
                .map(|t| {
                    let c = match t {
                        Trit::Zero => 0.0,
                        Trit::One => w,
                        Trit::Bot => w.max(0.0),
                    };
                    (c, t)
                })
                .min_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .unwrap()
                        .then_with(|| rank_neg(a.1).cmp(&rank_neg(b.1)))
                })
                .expect("allowed sets are nonempty");
            total += best;
            witness.push(choice);
        }
        Ok((total < self.threshold).then(|| PartialInstance::new(witness)))
    }
}

/// Tie-breaks reproducing the closed-form witness: on `◇` with w >= 0, the
/// all-pos witness picks 1 (contribution w >= 0 ties with 0 at w == 0).
fn rank_pos(t: Trit) -> u8 {
    match t {
        Trit::One => 0,
        Trit::Zero => 1,
        Trit::Bot => 2,
    }
}

fn rank_neg(t: Trit) -> u8 {
    match t {
        Trit::Zero => 0,
        Trit::One => 1,
        Trit::Bot => 2,
    }
}

/// An undetermined instance with per-component allowed value sets, the shape
/// the determinization oracles actually consume. A plain `◇` component allows
/// all of `{0,1,?}`; containment facts can narrow a component to `{v, ?}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainInstance {
    /// Per component: bitmask over (Bot=1, Zero=2, One=4).
    masks: Vec<u8>,
}

const MASK_BOT: u8 = 1;
const MASK_ZERO: u8 = 2;
const MASK_ONE: u8 = 4;
const MASK_ALL: u8 = 7;

impl DomainInstance {
    pub fn unrestricted(n: usize) -> DomainInstance {
        DomainInstance { masks: vec![MASK_ALL; n] }
    }

    pub fn from_undetermined(u: &UndeterminedInstance) -> Result<DomainInstance> {
        let masks = u
            .values()
            .iter()
            .map(|&q| match q {
                Quad::Bot => MASK_BOT,
                Quad::Zero => MASK_ZERO,
                Quad::One => MASK_ONE,
                Quad::Diamond => MASK_ALL,
            })
            .collect();
        Ok(DomainInstance { masks })
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn pin(&mut self, i: usize, t: Trit) -> bool {
        self.restrict(i, mask_of(t))
    }

    /// Intersect component `i` with `mask`; false if it becomes empty.
    pub fn restrict(&mut self, i: usize, mask: u8) -> bool {
        self.masks[i] &= mask;
        self.masks[i] != 0
    }

    pub fn allows(&self, i: usize, t: Trit) -> bool {
        self.masks[i] & mask_of(t) != 0
    }

    pub fn allowed(&self, i: usize) -> impl Iterator<Item = Trit> + '_ {
        [Trit::Bot, Trit::Zero, Trit::One]
            .into_iter()
            .filter(move |&t| self.allows(i, t))
    }

    /// The unique allowed value, if the component is fully pinned.
    pub fn fixed(&self, i: usize) -> Option<Trit> {
        match self.masks[i] {
            MASK_BOT => Some(Trit::Bot),
            MASK_ZERO => Some(Trit::Zero),
            MASK_ONE => Some(Trit::One),
            _ => None,
        }
    }
}

fn mask_of(t: Trit) -> u8 {
    match t {
        Trit::Bot => MASK_BOT,
        Trit::Zero => MASK_ZERO,
        Trit::One => MASK_ONE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(text: &str) -> UndeterminedInstance {
        let inner = text.trim_start_matches('(').trim_end_matches(')');
        UndeterminedInstance::new(
            inner
                .split(',')
                .map(|p| match p.trim() {
                    "0" => Quad::Zero,
                    "1" => Quad::One,
                    "?" => Quad::Bot,
                    "*" => Quad::Diamond,
                    other => panic!("bad quad {other}"),
                })
                .collect(),
        )
    }

    #[test]
    fn classify_examples() {
        let p = Perceptron::new(vec![1.0, 1.0], 2.0);
        assert!(p.classify(&PartialInstance::from_bits(&[true, true])).unwrap());
        assert!(!p.classify(&PartialInstance::from_bits(&[true, false])).unwrap());
        assert!(p.classify(&PartialInstance::parse("(1,?)").unwrap()).is_err());
    }

    /// Brute-force oracle: some determinization has all completions positive.
    fn brute_dap(p: &Perceptron, u: &UndeterminedInstance) -> bool {
        u.determinizations()
            .any(|d| d.completions().all(|c| p.classify(&c).unwrap()))
    }

    fn brute_dan(p: &Perceptron, u: &UndeterminedInstance) -> bool {
        u.determinizations()
            .any(|d| d.completions().all(|c| !p.classify(&c).unwrap()))
    }

    #[test]
    fn det_all_pos_examples() {
        // w=(1,-2), t=0, u=(*,?): 0 + min(0,-2) + max(0,1) = -1 < 0 -> absent.
        let p = Perceptron::new(vec![1.0, -2.0], 0.0);
        assert!(p.det_all_pos(&u("(*,?)")).unwrap().is_none());
        assert!(!brute_dap(&p, &u("(*,?)")));

        // Same weights, t=-2: present with witness (1,?).
        let p = Perceptron::new(vec![1.0, -2.0], -2.0);
        let w = p.det_all_pos(&u("(*,?)")).unwrap().unwrap();
        assert_eq!(w, PartialInstance::parse("(1,?)").unwrap());
        assert!(brute_dap(&p, &u("(*,?)")));

        // Zero weights, zero threshold: ties classify positive.
        let p = Perceptron::new(vec![0.0, 0.0], 0.0);
        assert!(p.det_all_pos(&u("(?,?)")).unwrap().is_some());
    }

    #[test]
    fn det_all_neg_examples() {
        let p = Perceptron::new(vec![1.0, 1.0], 1.0);
        let w = p.det_all_neg(&u("(*,*)")).unwrap().unwrap();
        assert_eq!(w, PartialInstance::parse("(0,0)").unwrap());
        assert!(brute_dan(&p, &u("(*,*)")));

        let p = Perceptron::new(vec![0.0, 0.0], 0.0);
        assert!(p.det_all_neg(&u("(?,?)")).unwrap().is_none());
        assert!(!brute_dan(&p, &u("(?,?)")));
    }

    #[test]
    fn closed_forms_match_brute_force_small() {
        // Deterministic sweep over small weight grids and all u over {?,*}^3
        // plus mixed defined components.
        let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let quads = [Quad::Bot, Quad::Zero, Quad::One, Quad::Diamond];
        for &w0 in &grid {
            for &w1 in &grid {
                for &t in &[-1.0, 0.0, 1.0, 2.0] {
                    let p = Perceptron::new(vec![w0, w1], t);
                    for &q0 in &quads {
                        for &q1 in &quads {
                            let u = UndeterminedInstance::new(vec![q0, q1]);
                            let dap = p.det_all_pos(&u).unwrap();
                            assert_eq!(dap.is_some(), brute_dap(&p, &u), "dap {p:?} {u}");
                            if let Some(w) = dap {
                                assert!(u.is_determinization(&w));
                                assert!(w.completions().all(|c| p.classify(&c).unwrap()));
                            }
                            let dan = p.det_all_neg(&u).unwrap();
                            assert_eq!(dan.is_some(), brute_dan(&p, &u), "dan {p:?} {u}");
                            if let Some(w) = dan {
                                assert!(u.is_determinization(&w));
                                assert!(w.completions().all(|c| !p.classify(&c).unwrap()));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn weight_negation_symmetry() {
        // Negating weights and nudging the threshold swaps the two oracles
        // on +/- symmetric inputs.
        let p = Perceptron::new(vec![2.0, -1.0, 0.5], 1.0);
        let q = Perceptron::new(vec![-2.0, 1.0, -0.5], -1.0 + 1e-9);
        for quads in [
            vec![Quad::Diamond, Quad::Bot, Quad::Diamond],
            vec![Quad::Bot, Quad::Bot, Quad::Bot],
            vec![Quad::Diamond, Quad::Diamond, Quad::Diamond],
        ] {
            let u = UndeterminedInstance::new(quads);
            assert_eq!(brute_dap(&p, &u), p.det_all_pos(&u).unwrap().is_some());
            // The inequality w·e >= t maps to -w·e <= -t, i.e. strictly-less
            // fails only on exact ties; the epsilon shift restores duality.
            assert_eq!(
                p.det_all_pos(&u).unwrap().is_some(),
                q.det_all_neg(&u).unwrap().is_some()
            );
        }
    }
}
