use super::{Dataset, FeatureIndex};

/// Replaces every feature by one indicator per interior threshold.
///
/// Feature `f` with `u` distinct values becomes `u - 1` columns; column `j`
/// is 0 when the value lies below the midpoint of the `j`-th and `(j+1)`-th
/// distinct values and 1 otherwise. Constant features vanish. Any tree on the
/// result maps to a tree on the input with the same training loss and back.
pub fn binarize_equivalent(ds: &Dataset) -> Dataset {
    let index = FeatureIndex::build(ds);
    let n = ds.n();
    let mut columns = Vec::new();
    let mut names = Vec::new();
    for f in 0..ds.p() {
        let order = index.feature(f);
        let col = ds.column(f);
        for t in 1..order.u() {
            let cut = order.midpoint(t);
            columns.extend(col.iter().map(|&x| if x < cut { 0.0 } else { 1.0 }));
            names.push(format!("{}>={}", ds.feature_names()[f], cut));
        }
    }
    if names.is_empty() {
        // Every feature was constant: keep a single constant column so the
        // result is still a valid dataset.
        columns = vec![0.0; n];
        names.push("const".to_string());
    }
    Dataset::from_columns(n, columns, names, ds.targets().clone())
        .expect("binarized copy of a valid dataset is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::toy6;
    use crate::dataset::Targets;

    #[test]
    fn toy6_column_count() {
        // u = 5, 6, 3 distinct values per feature
        let b = binarize_equivalent(toy6().data());
        assert_eq!(b.p(), 4 + 5 + 2);
        assert_eq!(b.n(), 6);
        assert!(b.column(0).iter().all(|&x| x == 0.0 || x == 1.0));
    }

    #[test]
    fn three_values() {
        let ds = Dataset::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0]],
            Targets::from_raw_labels(&["a", "b", "a"]),
        )
        .unwrap();
        let b = binarize_equivalent(&ds);
        assert_eq!(b.p(), 2);
        assert_eq!(b.row(0), vec![0.0, 0.0]);
        assert_eq!(b.row(1), vec![1.0, 0.0]);
        assert_eq!(b.row(2), vec![1.0, 1.0]);
        assert_eq!(b.targets(), ds.targets());
    }

    #[test]
    fn constant_feature_contributes_nothing() {
        let ds = Dataset::from_rows(
            &[vec![7.0, 1.0], vec![7.0, 2.0]],
            Targets::from_raw_labels(&["a", "b"]),
        )
        .unwrap();
        assert_eq!(binarize_equivalent(&ds).p(), 1);
    }
}
