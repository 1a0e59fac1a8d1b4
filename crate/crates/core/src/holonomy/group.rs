use std::collections::BTreeSet;

use serde::Serialize;

use super::permutation::{compose, Permutation, PermutationError};

/// Finite permutation group generated by measured loop permutations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaGroup {
    elements: BTreeSet<Permutation>,
    generators: Vec<Permutation>,
}

/// Result of a commutativity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbelianCheck {
    pub abelian: bool,
    /// A non-commuting pair when `abelian` is false.
    pub witness: Option<(Permutation, Permutation)>,
}

/// Closure of `gens` under composition.
pub fn lambda_group(gens: &[Permutation]) -> Result<LambdaGroup, PermutationError> {
    let n = gens.first().ok_or(PermutationError::NoGenerators)?.size();
    LambdaGroup::generate(n, gens)
}

/// Commutativity of all element pairs, with a witness when it fails.
pub fn is_abelian(g: &LambdaGroup) -> AbelianCheck {
    g.abelian_check()
}

impl LambdaGroup {
    /// Closure of `gens` (possibly empty) acting on `n` labels.
    pub fn generate(n: usize, gens: &[Permutation]) -> Result<Self, PermutationError> {
        for g in gens {
            if g.size() != n {
                return Err(PermutationError::SizeMismatch {
                    left: n,
                    right: g.size(),
                });
            }
        }
        let mut elements = BTreeSet::new();
        let id = Permutation::identity(n);
        elements.insert(id.clone());
        let mut frontier = vec![id];
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = compose(g, &x)?;
                if elements.insert(y.clone()) {
                    frontier.push(y);
                }
            }
        }
        Ok(Self {
            elements,
            generators: gens.to_vec(),
        })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> impl Iterator<Item = &Permutation> {
        self.elements.iter()
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.elements.contains(p)
    }

    /// Generators are tried first so the witness is a pair of measured loops
    /// whenever possible.
    pub fn abelian_check(&self) -> AbelianCheck {
        let candidates: Vec<&Permutation> = self.generators.iter().chain(self.elements.iter()).collect();
        for (k, a) in candidates.iter().enumerate() {
            for b in &candidates[k + 1..] {
                if !a.commutes_with(b) {
                    return AbelianCheck {
                        abelian: false,
                        witness: Some(((*a).clone(), (*b).clone())),
                    };
                }
            }
        }
        AbelianCheck {
            abelian: true,
            witness: None,
        }
    }
}
