use std::collections::HashMap;

use rand::Rng;

use super::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Named learnable tensors. Names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(TensorError::DuplicateParameter(name));
        }
        let id = ParamId(self.values.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.ids().map(move |id| (id, self.names[id.0].as_str(), &self.values[id.0]))
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|t| t.data().len()).sum()
    }

    /// Overwrites values by name. Every parameter must be provided with a matching shape.
    pub fn load<'a>(&mut self, named: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Result<()> {
        let mut seen = vec![false; self.len()];
        for (name, t) in named {
            let id = self
                .id(name)
                .ok_or_else(|| TensorError::UnknownParameter(name.to_string()))?;
            let current = &self.values[id.0];
            if current.shape() != t.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "load",
                    left: current.shape(),
                    right: t.shape(),
                });
            }
            self.values[id.0] = t.clone();
            seen[id.0] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(TensorError::UnknownParameter(format!(
                "{} (missing from input)",
                self.names[missing]
            )));
        }
        Ok(())
    }
}

/// Uniform Glorot initialization for a `fan_in x fan_out` weight.
pub fn glorot_uniform(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Tensor::new(fan_in, fan_out, data).expect("length matches shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_are_unique() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::zeros(1, 1)).unwrap();
        assert_eq!(
            s.add("a", Tensor::zeros(1, 1)),
            Err(TensorError::DuplicateParameter("a".into()))
        );
    }

    #[test]
    fn glorot_respects_limit_and_seed() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = glorot_uniform(&mut r1, 10, 6);
        assert_eq!(a, glorot_uniform(&mut r2, 10, 6));
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(a.data().iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn load_checks_names_and_shapes() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(2, 2)).unwrap();
        let good = Tensor::filled(2, 2, 1.0);
        s.load([("w", &good)]).unwrap();
        assert_eq!(s.get(s.id("w").unwrap()), &good);
        assert!(s.load([("w", &Tensor::zeros(1, 2))]).is_err());
        assert!(s.load([("v", &good)]).is_err());
        assert!(s.load(std::iter::empty()).is_err());
    }
}
