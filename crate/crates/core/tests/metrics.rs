use osmp::eval::*;

fn pts(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|x| vec![*x]).collect()
}

#[test]
fn rmse_examples() {
    let a = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
    assert_eq!(traj_rmse(&a, &a).unwrap(), 0.0);
    let b: Vec<Vec<f64>> = a.iter().map(|p| p.iter().map(|v| v + 0.3).collect()).collect();
    assert!((traj_rmse(&a, &b).unwrap() - 0.3).abs() < 1e-15);
    assert!(traj_rmse(&a, &b[..1]).is_err());
}

#[test]
fn dtw_examples() {
    let a = pts(&[0.0, 1.0]);
    let b = pts(&[0.0, 2.0]);
    assert_eq!(dtw(&a, &b).unwrap().0, 1.0);
    assert_eq!(dtw_normalized(&a, &b).unwrap(), 0.5);
    assert_eq!(dtw_normalized(&a, &a).unwrap(), 0.0);
    let (_, path) = dtw(&pts(&[0.0, 1.0, 2.0]), &pts(&[0.0, 0.0, 2.0, 2.0])).unwrap();
    assert_eq!(path.first(), Some(&(0, 0)));
    assert_eq!(path.last(), Some(&(2, 3)));
}

#[test]
fn hausdorff_examples() {
    let o = vec![vec![0.0, 0.0]];
    assert_eq!(directed_hausdorff(&o, &[vec![3.0, 4.0]]).unwrap(), 5.0);
    let a = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
    assert_eq!(directed_hausdorff(&a, &o).unwrap(), 10.0);
    assert_eq!(directed_hausdorff(&o, &a).unwrap(), 0.0);
}
