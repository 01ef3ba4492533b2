use attrition_conformal::io::{load_csv, write_dataset_csv, ColumnMapping};
use attrition_conformal::pipeline::{aggregate_ate, cise, difference_in_means, run_method, Method};
use attrition_conformal::sim::{compute_metrics, generate, DgpKind, DgpSpec};
use attrition_conformal::{ConformalConfig, LearnerRoles};

#[test]
fn csv_round_trip_preserves_the_dataset() {
    let draw = generate(&DgpSpec::new(DgpKind::Dgp2, 300).with_rho(0.5).with_seed(9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset_csv(&draw.data, &path).unwrap();
    let back = load_csv(&path, &ColumnMapping::standard(draw.data.k())).unwrap();
    assert_eq!(back, draw.data);
}

#[test]
fn cise_on_loaded_data_matches_in_memory_run() {
    let draw = generate(&DgpSpec::new(DgpKind::Dgp1, 1000).with_seed(31)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset_csv(&draw.data, &path).unwrap();
    let loaded = load_csv(&path, &ColumnMapping::standard(10)).unwrap();

    let cfg = ConformalConfig::default().with_seed(4);
    let roles = LearnerRoles::glm();
    let a = cise(&draw.data, &cfg, &roles).unwrap();
    let b = cise(&loaded, &cfg, &roles).unwrap();
    assert_eq!(a, b);

    let att = draw.data.attrition_rows();
    assert_eq!(a.attrition.iter().map(|x| x.row).collect::<Vec<_>>(), att);
    let truths: Vec<f64> = att.iter().map(|&i| draw.truth.ite[i]).collect();
    let m = compute_metrics(&a.attrition_intervals(), &truths).unwrap();
    assert!(m.coverage >= 0.9, "coverage {}", m.coverage);
    assert_eq!(m.n_infinite, 0);

    let ate = aggregate_ate(&a, &draw.data, difference_in_means(&draw.data).unwrap()).unwrap();
    assert!(ate.ate_all.value.is_finite());
}

#[test]
fn every_method_returns_one_interval_per_attrited_row() {
    let draw = generate(&DgpSpec::new(DgpKind::AppendixE, 1200).with_seed(5)).unwrap();
    let cfg = ConformalConfig::default().with_seed(1);
    let n_att = draw.data.attrition_rows().len();
    for method in [
        Method::Cise,
        Method::WcqrNestedExact,
        Method::WcqrNestedInexact,
    ] {
        let res = run_method(method, &draw.data, &cfg, &LearnerRoles::glm()).unwrap();
        assert_eq!(res.method, method);
        assert_eq!(res.attrition.len(), n_att, "{method}");
        assert!(res.attrition.iter().all(|a| a.interval.lo <= a.interval.hi));
    }
}
