//! Mixed-radix enumeration of parent configurations.
//!
//! The first parent is the least significant digit, so for arities `(2, 3)`
//! the configuration `(1, 2)` has index `1 + 2*2 = 5`.

use crate::error::{DbnError, Result};

pub fn num_configurations(arities: &[usize]) -> usize {
    arities.iter().product()
}

pub fn configuration_index(values: &[usize], arities: &[usize]) -> Result<usize> {
    if values.len() != arities.len() {
        return Err(DbnError::Dimension(format!(
            "{} parent values for {} arities",
            values.len(),
            arities.len()
        )));
    }
    let mut index = 0usize;
    let mut stride = 1usize;
    for (k, (&v, &a)) in values.iter().zip(arities).enumerate() {
        if v >= a {
            return Err(DbnError::Range(format!("parent {k} value {v} not below arity {a}")));
        }
        index += v * stride;
        stride *= a;
    }
    Ok(index)
}

/// Inverse of [`configuration_index`].
pub fn configuration_values(mut index: usize, arities: &[usize]) -> Result<Vec<usize>> {
    let total = num_configurations(arities);
    if index >= total {
        return Err(DbnError::Range(format!("configuration index {index} not below {total}")));
    }
    let mut out = Vec::with_capacity(arities.len());
    for &a in arities {
        out.push(index % a);
        index /= a;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(configuration_index(&[0, 0], &[2, 2]).unwrap(), 0);
        assert_eq!(configuration_index(&[1, 0], &[2, 2]).unwrap(), 1);
        assert_eq!(configuration_index(&[1, 2], &[2, 3]).unwrap(), 5);
        assert_eq!(configuration_index(&[], &[]).unwrap(), 0);
        assert!(matches!(configuration_index(&[2], &[2]), Err(DbnError::Range(_))));
        assert!(configuration_index(&[0], &[2, 2]).is_err());
    }

    proptest! {
        #[test]
        fn index_roundtrip(arities in prop::collection::vec(1usize..6, 0..6), seed in any::<u64>()) {
            let total = num_configurations(&arities);
            prop_assume!(total <= 10_000);
            let idx = (seed as usize) % total;
            let vals = configuration_values(idx, &arities).unwrap();
            prop_assert_eq!(configuration_index(&vals, &arities).unwrap(), idx);
        }
    }

    #[test]
    fn exhaustive_bijection() {
        let arities = [3, 2, 4];
        let mut seen = [false; 24];
        for a in 0..3 {
            for b in 0..2 {
                for c in 0..4 {
                    let i = configuration_index(&[a, b, c], &arities).unwrap();
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(configuration_values(i, &arities).unwrap(), vec![a, b, c]);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
