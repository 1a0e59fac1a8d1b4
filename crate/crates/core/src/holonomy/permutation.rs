use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermutationError {
    #[error("permutation sizes differ ({left} vs {right})")]
    SizeMismatch { left: usize, right: usize },
    #[error("image list is not a bijection on 1..={0}")]
    NotBijective(usize),
    #[error("label {label} out of range 1..={size}")]
    LabelOutOfRange { label: usize, size: usize },
    #[error("cycle notation error at byte {at}: {message}")]
    Parse { at: usize, message: String },
    #[error("empty generator list")]
    NoGenerators,
}

/// Bijection on eigenvalue labels. Stored 0-based; displayed and parsed in
/// 1-based cycle notation, where `(132)` means 1→3, 3→2, 2→1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    /// From 0-based images: label `k` maps to `images[k]`.
    pub fn from_images(images: Vec<usize>) -> Result<Self, PermutationError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(PermutationError::NotBijective(n));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    /// From 1-based images, e.g. `[1, 3, 2]` for `(23)`.
    pub fn from_one_based(images: &[usize]) -> Result<Self, PermutationError> {
        if images.iter().any(|&i| i == 0) {
            return Err(PermutationError::NotBijective(images.len()));
        }
        Self::from_images(images.iter().map(|i| i - 1).collect())
    }

    /// Parses cycle notation on `n` labels. Juxtaposed cycles compose right to
    /// left, so `(132)(23)` applies `(23)` first. Labels are single digits
    /// unless the cycle contains commas: `(1,10)`.
    pub fn parse_cycles(text: &str, n: usize) -> Result<Self, PermutationError> {
        let err = |at: usize, message: &str| PermutationError::Parse {
            at,
            message: message.to_string(),
        };
        let bytes = text.as_bytes();
        let mut result = Self::identity(n);
        let mut factors: Vec<Self> = Vec::new();
        let mut pos = 0;
        let skip_ws = |pos: &mut usize| {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
        };
        skip_ws(&mut pos);
        if pos == bytes.len() {
            return Err(err(pos, "empty input"));
        }
        while pos < bytes.len() {
            if bytes[pos] != b'(' {
                return Err(err(pos, "expected `(`"));
            }
            let open = pos;
            let close = text[open..]
                .find(')')
                .map(|k| open + k)
                .ok_or_else(|| err(open, "unclosed `(`"))?;
            let body = &text[open + 1..close];
            if body.contains('(') {
                return Err(err(open, "nested `(`"));
            }
            let labels: Vec<usize> = if body.contains(',') {
                body.split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| err(open + 1, "bad label")))
                    .collect::<Result<_, _>>()?
            } else {
                body.chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| err(open + 1, "bad label")))
                    .collect::<Result<_, _>>()?
            };
            let mut cycle: Vec<usize> = Vec::with_capacity(labels.len());
            for l in labels {
                if l == 0 || l > n {
                    return Err(PermutationError::LabelOutOfRange { label: l, size: n });
                }
                if cycle.contains(&(l - 1)) {
                    return Err(err(open, "label repeated within a cycle"));
                }
                cycle.push(l - 1);
            }
            let mut images: Vec<usize> = (0..n).collect();
            for (k, &from) in cycle.iter().enumerate() {
                images[from] = cycle[(k + 1) % cycle.len()];
            }
            factors.push(Self { images });
            pos = close + 1;
            skip_ws(&mut pos);
        }
        for f in factors.iter().rev() {
            result = compose(f, &result)?;
        }
        Ok(result)
    }

    pub fn size(&self) -> usize {
        self.images.len()
    }

    /// 0-based images.
    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// 1-based images.
    pub fn one_based(&self) -> Vec<usize> {
        self.images.iter().map(|i| i + 1).collect()
    }

    /// Image of the 0-based label `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(k, &i)| k == i)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (k, &i) in self.images.iter().enumerate() {
            inv[i] = k;
        }
        Self { images: inv }
    }

    /// Non-trivial cycles, 0-based, each starting at its smallest label.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut k = self.images[start];
            while k != start {
                seen[k] = true;
                cycle.push(k);
                k = self.images[k];
            }
            if cycle.len() > 1 {
                out.push(cycle);
            }
        }
        out
    }

    /// Cycle lengths including fixed points, sorted descending.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut lens: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        let moved: usize = lens.iter().sum();
        lens.extend(std::iter::repeat(1).take(self.size() - moved));
        lens.sort_unstable_by(|a, b| b.cmp(a));
        lens
    }

    /// Length of the longest cycle.
    pub fn max_cycle_len(&self) -> usize {
        self.cycles().iter().map(Vec::len).max().unwrap_or(1)
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        self.images.len() == other.images.len()
            && (0..self.images.len()).all(|i| self.images[other.images[i]] == other.images[self.images[i]])
    }
}

/// `p2 ∘ p1`: apply `p1` first, then `p2`.
pub fn compose(p2: &Permutation, p1: &Permutation) -> Result<Permutation, PermutationError> {
    if p2.size() != p1.size() {
        return Err(PermutationError::SizeMismatch {
            left: p2.size(),
            right: p1.size(),
        });
    }
    Ok(Permutation {
        images: p1.images.iter().map(|&i| p2.images[i]).collect(),
    })
}

/// Inverse permutation.
pub fn inverse(p: &Permutation) -> Permutation {
    p.inverse()
}

/// Conjugate `q⁻¹ ∘ p ∘ q`: the permutation `p`, measured in primed labels,
/// rewritten in the labels that the relabelling `q` maps from.
pub fn conjugate(p: &Permutation, q: &Permutation) -> Result<Permutation, PermutationError> {
    compose(&q.inverse(), &compose(p, q)?)
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        let sep = if self.size() > 9 { "," } else { "" };
        for c in cycles {
            let labels: Vec<String> = c.iter().map(|k| (k + 1).to_string()).collect();
            write!(f, "({})", labels.join(sep))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}[n={}]", self.size())
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Cycle notation with an explicit size prefix, `"3:(132)"`, or plain cycle
/// notation sized by its largest label.
impl FromStr for Permutation {
    type Err = PermutationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((n, rest)) = s.split_once(':') {
            let n = n.trim().parse().map_err(|_| PermutationError::Parse {
                at: 0,
                message: "bad size prefix".into(),
            })?;
            return Self::parse_cycles(rest, n);
        }
        let max_label = s
            .split(|c: char| !c.is_ascii_digit())
            .flat_map(|tok| {
                if s.contains(',') {
                    vec![tok.parse::<usize>().unwrap_or(0)]
                } else {
                    tok.chars().filter_map(|c| c.to_digit(10).map(|d| d as usize)).collect()
                }
            })
            .max()
            .unwrap_or(0);
        Self::parse_cycles(s, max_label.max(1))
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
