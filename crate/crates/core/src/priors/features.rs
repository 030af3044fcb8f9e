use serde::{Deserialize, Serialize};

use crate::evidence::FeatureMap;

/// Fixed state featurizations standing in for a learned encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFeatures {
    /// `[1.0]` regardless of state (bandits).
    Constant,
    /// The raw state vector.
    Raw { dim: usize },
    /// One-hot grid cell over a `size × size` grid.
    GridOneHot { size: usize },
    /// `(x, y) / (size - 1)`.
    GridScaledXY { size: usize },
}

impl StateFeatures {
    pub fn dim(&self) -> usize {
        match *self {
            StateFeatures::Constant => 1,
            StateFeatures::Raw { dim } => dim,
            StateFeatures::GridOneHot { size } => size * size,
            StateFeatures::GridScaledXY { .. } => 2,
        }
    }

    pub fn encode(&self, state: &[f64]) -> Vec<f64> {
        match *self {
            StateFeatures::Constant => vec![1.0],
            StateFeatures::Raw { .. } => state.to_vec(),
            StateFeatures::GridOneHot { size } => {
                let mut v = vec![0.0; size * size];
                let x = (state[0].round() as usize).min(size - 1);
                let y = (state[1].round() as usize).min(size - 1);
                v[x * size + y] = 1.0;
                v
            }
            StateFeatures::GridScaledXY { size } => {
                let scale = (size.max(2) - 1) as f64;
                vec![state[0] / scale, state[1] / scale]
            }
        }
    }
}

impl FeatureMap for StateFeatures {
    fn features(&self, state: &[f64]) -> Vec<f64> {
        self.encode(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodings() {
        assert_eq!(StateFeatures::Constant.encode(&[3.0, 4.0]), vec![1.0]);
        let oh = StateFeatures::GridOneHot { size: 10 }.encode(&[3.0, 4.0]);
        assert_eq!(oh.len(), 100);
        assert_eq!(oh[34], 1.0);
        assert_eq!(oh.iter().sum::<f64>(), 1.0);
        assert_eq!(StateFeatures::GridScaledXY { size: 10 }.encode(&[9.0, 0.0]), vec![1.0, 0.0]);
    }
}
