use crate::error::{Error, Result};

/// Knuth-Morris-Pratt matcher compiled to a full transition table over a
/// finite alphabet.
///
/// States are `0..=len`, the number of pattern symbols currently matched;
/// `len` means a complete match. From `len` the table continues with the
/// longest proper border, so overlapping matches are found.
#[derive(Debug, Clone)]
pub struct PrefixAutomaton {
    pattern: Vec<usize>,
    alphabet: usize,
    table: Vec<u32>,
}

impl PrefixAutomaton {
    pub fn new(pattern: &[usize], alphabet: usize) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::InvalidInput("pattern must be nonempty".into()));
        }
        if alphabet == 0 {
            return Err(Error::InvalidInput("alphabet must be nonempty".into()));
        }
        if let Some(&s) = pattern.iter().find(|&&s| s >= alphabet) {
            return Err(Error::InvalidInput(format!(
                "pattern symbol {s} outside alphabet of size {alphabet}"
            )));
        }
        if pattern.len() >= u32::MAX as usize {
            return Err(Error::InvalidInput("pattern too long".into()));
        }
        let len = pattern.len();
        let a = alphabet;
        let mut table = vec![0u32; (len + 1) * a];
        table[pattern[0]] = 1;
        let mut border = 0usize;
        for j in 1..=len {
            let (done, rest) = table.split_at_mut(j * a);
            rest[..a].copy_from_slice(&done[border * a..border * a + a]);
            if j < len {
                rest[pattern[j]] = (j + 1) as u32;
                border = done[border * a + pattern[j]] as usize;
            }
        }
        Ok(Self {
            pattern: pattern.to_vec(),
            alphabet,
            table,
        })
    }

    pub fn pattern(&self) -> &[usize] {
        &self.pattern
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Next state after reading `symbol` in `state`.
    #[inline(always)]
    pub fn step(&self, state: usize, symbol: usize) -> usize {
        self.table[state * self.alphabet + symbol] as usize
    }

    #[inline]
    pub fn is_accepting(&self, state: usize) -> bool {
        state == self.pattern.len()
    }

    /// Feeds a slice from `state`, returning the offset just past the first
    /// completed match, or the final state if none completes.
    pub fn feed(&self, mut state: usize, symbols: &[usize]) -> std::result::Result<usize, usize> {
        let len = self.pattern.len() as u32;
        let a = self.alphabet;
        for (i, &s) in symbols.iter().enumerate() {
            let next = self.table[state * a + s];
            if next == len {
                return Ok(i + 1);
            }
            state = next as usize;
        }
        Err(state)
    }
}
