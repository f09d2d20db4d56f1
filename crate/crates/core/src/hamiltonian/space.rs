use serde::Serialize;

/// Basis of computational configurations, stored as atom bitmasks in
/// increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Space {
    num_atoms: usize,
    full: bool,
    configs: Vec<u64>,
}

impl Space {
    /// All `2^N` configurations.
    pub fn full(num_atoms: usize) -> Self {
        Self {
            num_atoms,
            full: true,
            configs: (0..1u64 << num_atoms).collect(),
        }
    }

    /// Configurations with no excited pair on `edges`.
    pub fn independent_sets(num_atoms: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![0u64; num_atoms];
        for &(a, b) in edges {
            adjacency[a] |= 1 << b;
            adjacency[b] |= 1 << a;
        }
        let mut configs = Vec::new();
        let mut stack = vec![(0usize, 0u64)];
        while let Some((next, set)) = stack.pop() {
            if next == num_atoms {
                configs.push(set);
                continue;
            }
            stack.push((next + 1, set));
            if adjacency[next] & set == 0 {
                stack.push((next + 1, set | 1 << next));
            }
        }
        configs.sort_unstable();
        Self {
            num_atoms,
            full: false,
            configs,
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> u64 {
        self.configs[index]
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        if config >> self.num_atoms != 0 {
            return None;
        }
        if self.full {
            Some(config as usize)
        } else {
            self.configs.binary_search(&config).ok()
        }
    }
}
