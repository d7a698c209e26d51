use blitz_core::SparseColumnMatrix;
use blitz_harness::preprocess::{preprocess, variance, DropReason, PreprocessOptions};

fn matrix() -> SparseColumnMatrix {
    SparseColumnMatrix::from_dense_columns(
        4,
        &[
            vec![1.0, 2.0, 3.0, 4.0], // kept
            vec![0.0, 0.0, 5.0, 0.0], // one nonzero
            vec![2.0, 2.0, 2.0, 2.0], // constant
            vec![0.0, -1.0, 0.0, 1.0], // kept
        ],
    )
    .unwrap()
}

#[test]
fn drops_sparse_and_constant_columns() {
    let p = preprocess(&matrix(), &PreprocessOptions { min_nnz: 2, ..Default::default() }).unwrap();
    assert_eq!(p.kept, vec![0, 3]);
    assert_eq!(p.dropped, vec![(1, DropReason::TooFewNonzeros), (2, DropReason::ZeroVariance)]);
    assert_eq!(p.data.n_cols(), 2);
}

#[test]
fn columns_have_unit_variance() {
    let p = preprocess(&matrix(), &PreprocessOptions { min_nnz: 1, ..Default::default() }).unwrap();
    for c in p.data.columns() {
        assert!((variance(c, 4) - 1.0).abs() < 1e-12);
    }
    // variance of (1,2,3,4) is 1.25
    assert!((p.scales[0] - 1.25f64.sqrt().recip()).abs() < 1e-15);
}

#[test]
fn back_translation_undoes_the_scaling() {
    let m = matrix();
    let p = preprocess(&m, &PreprocessOptions { min_nnz: 2, ..Default::default() }).unwrap();
    let w = vec![0.7, -1.1];
    let orig = p.back_translate(&w);
    assert_eq!(orig.len(), 4);
    assert_eq!((orig[1], orig[2]), (0.0, 0.0));
    // same predictions on the original columns
    let a = p.data.mul_vec(&w);
    let b = m.mul_vec(&orig);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn bias_column_and_groups() {
    let opts = PreprocessOptions { min_nnz: 2, standardize: false, bias_column: true };
    let p = preprocess(&matrix(), &opts).unwrap();
    assert_eq!(p.data.n_cols(), 3);
    assert_eq!(p.data.column(2).iter().map(|(_, v)| v).collect::<Vec<_>>(), vec![1.0; 4]);
    assert_eq!(p.scales, vec![1.0, 1.0]);
    assert_eq!(p.remap_groups(&[vec![0, 1], vec![2], vec![3]]), vec![vec![0], vec![1]]);
    assert_eq!(p.index_map(), vec![Some(0), None, None, Some(1)]);
}
