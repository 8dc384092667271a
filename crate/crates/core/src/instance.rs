//! Partial and undetermined instances: the universe the logic is evaluated over.

use crate::error::{FoilError, Result};
use std::fmt;

/// A feature value in a partial instance. `Bot` is the undefined value, printed `?`.
///
/// The derived order `Bot < Zero < One` is the componentwise enumeration order
/// used by the naive evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trit {
    Bot,
    Zero,
    One,
}

impl Trit {
    pub fn from_bit(b: bool) -> Trit {
        if b {
            Trit::One
        } else {
            Trit::Zero
        }
    }

    pub fn is_defined(self) -> bool {
        self != Trit::Bot
    }

    pub fn as_bit(self) -> Option<bool> {
        match self {
            Trit::Bot => None,
            Trit::Zero => Some(false),
            Trit::One => Some(true),
        }
    }
}

/// A tri-valued feature vector over `{0, 1, ?}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialInstance {
    values: Vec<Trit>,
}

impl PartialInstance {
    pub fn new(values: Vec<Trit>) -> PartialInstance {
        assert!(!values.is_empty(), "instance dimension must be at least 1");
        PartialInstance { values }
    }

    /// The all-undefined instance of dimension `n`.
    pub fn bottom(n: usize) -> PartialInstance {
        PartialInstance::new(vec![Trit::Bot; n])
    }

    pub fn from_bits(bits: &[bool]) -> PartialInstance {
        PartialInstance::new(bits.iter().map(|&b| Trit::from_bit(b)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize) -> Trit {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: Trit) {
        self.values[i] = v;
    }

    pub fn values(&self) -> &[Trit] {
        &self.values
    }

    /// True iff no component is undefined.
    pub fn is_full(&self) -> bool {
        self.values.iter().all(|v| v.is_defined())
    }

    pub fn count_bot(&self) -> usize {
        self.values.iter().filter(|v| !v.is_defined()).count()
    }

    /// Subsumption: `self ⊆ other` iff every defined component of `self`
    /// equals the same component of `other`.
    pub fn subsumed_by(&self, other: &PartialInstance) -> Result<bool> {
        if self.dim() != other.dim() {
            return Err(FoilError::DimensionMismatch(format!(
                "subsumption between dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.subsumed_by_unchecked(other))
    }

    /// Same as [`subsumed_by`](Self::subsumed_by) but assumes equal dimensions.
    #[inline]
    pub fn subsumed_by_unchecked(&self, other: &PartialInstance) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(&a, &b)| a == Trit::Bot || a == b)
    }

    /// Iterate over all full completions (every `?` replaced by 0 or 1).
    pub fn completions(&self) -> impl Iterator<Item = PartialInstance> + '_ {
        let bots: Vec<usize> = (0..self.dim()).filter(|&i| self.get(i) == Trit::Bot).collect();
        let total = 1u64 << bots.len();
        (0..total).map(move |mask| {
            let mut inst = self.clone();
            for (k, &i) in bots.iter().enumerate() {
                inst.set(i, Trit::from_bit(mask >> k & 1 == 1));
            }
            inst
        })
    }

    /// Enumeration of the whole universe `{0,1,?}^n` in lexicographic order
    /// with `? < 0 < 1` componentwise, index 0 most significant.
    pub fn enumerate_all(n: usize) -> impl Iterator<Item = PartialInstance> {
        let total = 3u64.checked_pow(n as u32).expect("domain too large to enumerate");
        (0..total).map(move |mut code| {
            let mut values = vec![Trit::Bot; n];
            for slot in values.iter_mut().rev() {
                *slot = match code % 3 {
                    0 => Trit::Bot,
                    1 => Trit::Zero,
                    _ => Trit::One,
                };
                code /= 3;
            }
            PartialInstance::new(values)
        })
    }

    /// Parse the textual form `(0,1,?,0)`.
    pub fn parse(text: &str) -> Result<PartialInstance> {
        let t = text.trim();
        let inner = t
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| FoilError::Parse {
                line: 1,
                col: 1,
                msg: format!("expected a tuple like (0,1,?), got `{t}`"),
            })?;
        let mut values = Vec::new();
        for part in inner.split(',') {
            values.push(match part.trim() {
                "0" => Trit::Zero,
                "1" => Trit::One,
                "?" => Trit::Bot,
                other => {
                    return Err(FoilError::Parse {
                        line: 1,
                        col: 1,
                        msg: format!("invalid component `{other}` in instance"),
                    })
                }
            });
        }
        if values.is_empty() {
            return Err(FoilError::Parse {
                line: 1,
                col: 1,
                msg: "empty instance".into(),
            });
        }
        Ok(PartialInstance::new(values))
    }
}

impl fmt::Display for PartialInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match v {
                Trit::Bot => write!(f, "?")?,
                Trit::Zero => write!(f, "0")?,
                Trit::One => write!(f, "1")?,
            }
        }
        write!(f, ")")
    }
}

impl fmt::Debug for PartialInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A feature value in an undetermined instance: `Diamond` marks a component
/// still to be chosen from `{0, 1, ?}` by a determinization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quad {
    Bot,
    Zero,
    One,
    Diamond,
}

impl Quad {
    pub fn as_trit(self) -> Option<Trit> {
        match self {
            Quad::Bot => Some(Trit::Bot),
            Quad::Zero => Some(Trit::Zero),
            Quad::One => Some(Trit::One),
            Quad::Diamond => None,
        }
    }

    pub fn from_trit(t: Trit) -> Quad {
        match t {
            Trit::Bot => Quad::Bot,
            Trit::Zero => Quad::Zero,
            Trit::One => Quad::One,
        }
    }
}

/// A four-valued vector over `{0, 1, ?, ◇}` used by the determinization problems.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UndeterminedInstance {
    values: Vec<Quad>,
}

impl UndeterminedInstance {
    pub fn new(values: Vec<Quad>) -> UndeterminedInstance {
        assert!(!values.is_empty(), "instance dimension must be at least 1");
        UndeterminedInstance { values }
    }

    /// All components undetermined.
    pub fn all_diamond(n: usize) -> UndeterminedInstance {
        UndeterminedInstance::new(vec![Quad::Diamond; n])
    }

    /// Lift a partial instance, leaving nothing to determinize.
    pub fn from_partial(e: &PartialInstance) -> UndeterminedInstance {
        UndeterminedInstance::new(e.values().iter().map(|&t| Quad::from_trit(t)).collect())
    }

    /// Lift a partial instance turning every `?` into `◇`.
    pub fn diamonds_at_bot(e: &PartialInstance) -> UndeterminedInstance {
        UndeterminedInstance::new(
            e.values()
                .iter()
                .map(|&t| if t == Trit::Bot { Quad::Diamond } else { Quad::from_trit(t) })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize) -> Quad {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: Quad) {
        self.values[i] = v;
    }

    pub fn values(&self) -> &[Quad] {
        &self.values
    }

    /// True iff `e` replaces every `◇` with a value in `{0,1,?}` and changes
    /// nothing else.
    pub fn is_determinization(&self, e: &PartialInstance) -> bool {
        self.dim() == e.dim()
            && self
                .values
                .iter()
                .zip(e.values())
                .all(|(&q, &t)| match q.as_trit() {
                    Some(fixed) => fixed == t,
                    None => true,
                })
    }

    /// Iterate over all determinizations (3^#◇ of them).
    pub fn determinizations(&self) -> impl Iterator<Item = PartialInstance> + '_ {
        let diamonds: Vec<usize> =
            (0..self.dim()).filter(|&i| self.get(i) == Quad::Diamond).collect();
        let total = 3u64.checked_pow(diamonds.len() as u32).expect("too many diamonds");
        (0..total).map(move |mut code| {
            let mut values: Vec<Trit> =
                self.values.iter().map(|&q| q.as_trit().unwrap_or(Trit::Bot)).collect();
            for &i in &diamonds {
                values[i] = match code % 3 {
                    0 => Trit::Bot,
                    1 => Trit::Zero,
                    _ => Trit::One,
                };
                code /= 3;
            }
            PartialInstance::new(values)
        })
    }
}

impl fmt::Display for UndeterminedInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match v {
                Quad::Bot => write!(f, "?")?,
                Quad::Zero => write!(f, "0")?,
                Quad::One => write!(f, "1")?,
                Quad::Diamond => write!(f, "*")?,
            }
        }
        write!(f, ")")
    }
}

impl fmt::Debug for UndeterminedInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi(text: &str) -> PartialInstance {
        PartialInstance::parse(text).unwrap()
    }

    #[test]
    fn subsumption_examples() {
        assert!(pi("(1,0,?)").subsumed_by(&pi("(1,0,1)")).unwrap());
        assert!(!pi("(1,0,?)").subsumed_by(&pi("(1,1,1)")).unwrap());
        assert!(pi("(?,?)").subsumed_by(&pi("(?,?)")).unwrap());
        assert!(pi("(1,0,?)").subsumed_by(&pi("(1,1)")).is_err());
    }

    #[test]
    fn is_full_examples() {
        assert!(pi("(0,1)").is_full());
        assert!(!pi("(0,?)").is_full());
        assert!(!pi("(?)").is_full());
    }

    #[test]
    fn subsumption_is_partial_order_n3() {
        // Reflexive, antisymmetric, transitive over all of {0,1,?}^3.
        let all: Vec<PartialInstance> = PartialInstance::enumerate_all(3).collect();
        assert_eq!(all.len(), 27);
        for a in &all {
            assert!(a.subsumed_by_unchecked(a));
        }
        for a in &all {
            for b in &all {
                if a.subsumed_by_unchecked(b) && b.subsumed_by_unchecked(a) {
                    assert_eq!(a, b);
                }
            }
        }
        // 27^3 = 19683 triples.
        for a in &all {
            for b in &all {
                if !a.subsumed_by_unchecked(b) {
                    continue;
                }
                for c in &all {
                    if b.subsumed_by_unchecked(c) {
                        assert!(a.subsumed_by_unchecked(c));
                    }
                }
            }
        }
    }

    #[test]
    fn completions_count() {
        assert_eq!(pi("(?,0,?)").completions().count(), 4);
        assert_eq!(pi("(1,0)").completions().count(), 1);
        for c in pi("(?,0,?)").completions() {
            assert!(c.is_full());
            assert!(pi("(?,0,?)").subsumed_by(&c).unwrap());
        }
    }

    #[test]
    fn enumeration_order_and_size() {
        let all: Vec<PartialInstance> = PartialInstance::enumerate_all(2).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], pi("(?,?)"));
        assert_eq!(all[1], pi("(?,0)"));
        assert_eq!(all[2], pi("(?,1)"));
        assert_eq!(all[3], pi("(0,?)"));
        assert_eq!(all[8], pi("(1,1)"));
    }

    #[test]
    fn determinization_roundtrip() {
        let u = UndeterminedInstance::new(vec![Quad::Diamond, Quad::Bot, Quad::One]);
        let dets: Vec<PartialInstance> = u.determinizations().collect();
        assert_eq!(dets.len(), 3);
        for d in &dets {
            assert!(u.is_determinization(d));
            assert_eq!(d.get(1), Trit::Bot);
            assert_eq!(d.get(2), Trit::One);
        }
    }

    #[test]
    fn display_roundtrip() {
        for text in ["(0,1,?)", "(?)", "(1,1,1,0)"] {
            assert_eq!(pi(text).to_string(), text);
        }
    }
}
