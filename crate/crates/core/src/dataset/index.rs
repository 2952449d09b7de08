use super::Dataset;

/// A strictly increasing list of sample indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet(Vec<u32>);

impl IndexSet {
    pub fn full(n: usize) -> IndexSet {
        IndexSet((0..n as u32).collect())
    }

    pub fn empty() -> IndexSet {
        IndexSet(Vec::new())
    }

    /// Sorts and deduplicates `indices`.
    pub fn from_unsorted(mut indices: Vec<u32>) -> IndexSet {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: u32) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IndexSet::from_unsorted(v)
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        let (mut a, mut b) = (0, 0);
        while a < self.0.len() && b < other.0.len() {
            match self.0[a].cmp(&other.0[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }
}

impl From<IndexSet> for Vec<u32> {
    fn from(s: IndexSet) -> Vec<u32> {
        s.0
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a u32;
    type IntoIter = std::slice::Iter<'a, u32>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Sorted view of one feature column.
///
/// Ranks are 1-based: sample `i` has rank `t` when its value equals the `t`-th
/// smallest distinct value. Split index `t` (`0..=u`) sends every sample of rank
/// `<= t` to the left, which is the same as thresholding at the midpoint
/// between the `t`-th and `(t+1)`-th distinct values.
#[derive(Debug, Clone)]
pub struct FeatureOrder {
    sorted: Vec<u32>,
    position: Vec<u32>,
    rank: Vec<u32>,
    unique: Vec<f64>,
    // rank_end[t] = number of samples with rank <= t
    rank_end: Vec<u32>,
}

impl FeatureOrder {
    fn build(column: &[f64]) -> FeatureOrder {
        let n = column.len();
        let mut sorted: Vec<u32> = (0..n as u32).collect();
        // Stable sort keeps ties in sample order.
        sorted.sort_by(|&a, &b| column[a as usize].total_cmp(&column[b as usize]));
        let mut position = vec![0u32; n];
        let mut rank = vec![0u32; n];
        let mut unique = Vec::new();
        let mut rank_end = vec![0u32];
        for (pos, &i) in sorted.iter().enumerate() {
            let x = column[i as usize];
            if unique.last() != Some(&x) {
                unique.push(x);
                rank_end.push(pos as u32);
            }
            position[i as usize] = pos as u32;
            rank[i as usize] = unique.len() as u32;
        }
        rank_end.remove(1);
        rank_end.push(n as u32);
        FeatureOrder {
            sorted,
            position,
            rank,
            unique,
            rank_end,
        }
    }

    /// Number of distinct values.
    pub fn u(&self) -> usize {
        self.unique.len()
    }

    pub fn unique_values(&self) -> &[f64] {
        &self.unique
    }

    /// Sample indices by ascending value, ties by sample index.
    pub fn sorted_perm(&self) -> &[u32] {
        &self.sorted
    }

    #[inline]
    pub fn rank(&self, i: u32) -> usize {
        self.rank[i as usize] as usize
    }

    #[inline]
    pub fn position(&self, i: u32) -> u32 {
        self.position[i as usize]
    }

    /// Candidate threshold for split index `t`; `t = 0` and `t = u` map to
    /// negative and positive infinity.
    pub fn midpoint(&self, t: usize) -> f64 {
        let u = self.u();
        assert!(t <= u, "split index {t} out of range 0..={u}");
        if t == 0 {
            f64::NEG_INFINITY
        } else if t == u {
            f64::INFINITY
        } else {
            let (lo, hi) = (self.unique[t - 1], self.unique[t]);
            let m = lo / 2.0 + hi / 2.0;
            // Adjacent floats can round the midpoint onto `hi`; `lo` separates equally well.
            if lo <= m && m < hi {
                m
            } else {
                lo
            }
        }
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..=self.u()).map(|t| self.midpoint(t)).collect()
    }

    /// Samples whose rank lies in `(a, b]`, in sorted order.
    pub fn slice(&self, a: usize, b: usize) -> &[u32] {
        &self.sorted[self.rank_end[a] as usize..self.rank_end[b] as usize]
    }
}

/// Sorted views of every feature of a dataset.
#[derive(Debug, Clone)]
pub struct FeatureIndex {
    features: Vec<FeatureOrder>,
}

impl FeatureIndex {
    pub fn build(ds: &Dataset) -> FeatureIndex {
        FeatureIndex {
            features: (0..ds.p())
                .map(|f| FeatureOrder::build(ds.column(f)))
                .collect(),
        }
    }

    pub fn feature(&self, f: usize) -> &FeatureOrder {
        &self.features[f]
    }

    pub fn p(&self) -> usize {
        self.features.len()
    }

    /// Members of `set` whose rank on `f` lies in `(a, b]`.
    ///
    /// Panics unless `a <= b <= u(f)`.
    pub fn subset_range(&self, set: &IndexSet, f: usize, a: usize, b: usize) -> IndexSet {
        let order = &self.features[f];
        assert!(
            a <= b && b <= order.u(),
            "invalid interval [{a}, {b}] for feature with u = {}",
            order.u()
        );
        IndexSet(
            set.as_slice()
                .iter()
                .copied()
                .filter(|&i| {
                    let r = order.rank(i);
                    a < r && r <= b
                })
                .collect(),
        )
    }
}
