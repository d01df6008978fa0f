use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A bijective reordering of `0..n`.
///
/// `forward[i]` is the new position of original index `i`; `inverse[p]` is
/// the original index placed at position `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let forward: Vec<usize> = (0..n).collect();
        Self {
            inverse: forward.clone(),
            forward,
        }
    }

    /// Builds a permutation from its forward map (original index -> new position).
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let inverse = invert(&forward)?;
        Ok(Self { forward, inverse })
    }

    /// Builds a permutation from a visiting order: `order[p]` is the original
    /// index that ends up at position `p`.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let forward = invert(&order)?;
        Ok(Self {
            forward,
            inverse: order,
        })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverted(&self) -> Self {
        Self {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// `self` applied after `first`: index `i` goes to `self[first[i]]`.
    pub fn after(&self, first: &Permutation) -> Result<Self> {
        if first.len() != self.len() {
            return Err(Error::SizeMismatch(format!(
                "cannot compose permutations of length {} and {}",
                self.len(),
                first.len()
            )));
        }
        let forward = first.forward.iter().map(|&p| self.forward[p]).collect();
        Self::from_forward(forward)
    }

    /// Moves `data[i]` to position `forward[i]`.
    pub fn apply<T: Clone>(&self, data: &[T]) -> Vec<T> {
        assert_eq!(data.len(), self.len(), "permutation length mismatch");
        self.inverse.iter().map(|&orig| data[orig].clone()).collect()
    }

    /// Undoes [`apply`](Self::apply): `result[i] = data[forward[i]]`.
    pub fn unapply<T: Clone>(&self, data: &[T]) -> Vec<T> {
        assert_eq!(data.len(), self.len(), "permutation length mismatch");
        self.forward.iter().map(|&pos| data[pos].clone()).collect()
    }

    /// Stable fingerprint used to tag vectors laid out under this ordering.
    pub fn layout_tag(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.forward.hash(&mut h);
        h.finish()
    }

    /// Text format: `n` on the first line, then one forward index per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.len())?;
        for p in &self.forward {
            writeln!(w, "{p}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "missing length line".into(),
        })?;
        let n: usize = parse_line(&first?, 1)?;
        let mut forward = Vec::with_capacity(n);
        for (idx, line) in lines {
            forward.push(parse_line(&line?, idx + 1)?);
        }
        if forward.len() != n {
            return Err(Error::Parse {
                line: forward.len() + 2,
                reason: format!("expected {n} indices, found {}", forward.len()),
            });
        }
        Self::from_forward(forward)
    }
}

fn parse_line(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|e| Error::Parse {
        line,
        reason: format!("{e}"),
    })
}

fn invert(map: &[usize]) -> Result<Vec<usize>> {
    let n = map.len();
    let mut inv = vec![usize::MAX; n];
    for (i, &p) in map.iter().enumerate() {
        if p >= n || inv[p] != usize::MAX {
            return Err(Error::InvalidParameter(format!(
                "not a permutation: entry {i} maps to {p}"
            )));
        }
        inv[p] = i;
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::from_forward(vec![0, 0]).is_err());
        assert!(Permutation::from_forward(vec![0, 2]).is_err());
    }

    #[test]
    fn order_and_forward_agree() {
        let p = Permutation::from_order(vec![1, 2, 0]).unwrap();
        assert_eq!(p.forward(), &[2, 0, 1]);
        assert_eq!(p.apply(&['a', 'b', 'c']), vec!['b', 'c', 'a']);
        assert_eq!(p.unapply(&p.apply(&[5, 6, 7])), vec![5, 6, 7]);
    }

    #[test]
    fn text_roundtrip() {
        let p = Permutation::from_forward(vec![3, 1, 0, 2]).unwrap();
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf), "4\n3\n1\n0\n2\n");
        assert_eq!(Permutation::read_text(&buf[..]).unwrap(), p);
    }

    #[test]
    fn text_length_mismatch() {
        assert!(Permutation::read_text(&b"3\n0\n1\n"[..]).is_err());
    }

    #[test]
    fn composition() {
        let a = Permutation::from_forward(vec![1, 2, 0]).unwrap();
        let b = a.inverted();
        assert!(b.after(&a).unwrap().is_identity());
    }
}
