use sdefl::output::{emit_csv, emit_path_csv, emit_plot, path_from_table, read_csv, render_svg, Series, Table};
use sdefl::CliError;
use sdefl_core::models::simulate_heston;
use sdefl_core::{HestonParams, Path, RandomSource};

#[test]
fn scalar_path_gives_header_plus_rows() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.csv");
    emit_path_csv(&Path::scalar(0.0, 0.5, vec![1.0, 2.0, 3.0]).unwrap(), &file).unwrap();
    let text = std::fs::read_to_string(&file).unwrap();
    assert_eq!(text, "t,value\n0,1\n0.5,2\n1,3\n");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn csv_round_trip_is_bitwise() {
    let awkward = vec![0.1 + 0.2, 1e-300, -2.5e-310, 1.0 / 3.0, f64::MAX, -0.0, 123_456_789.123_456_78, std::f64::consts::PI];
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.csv");
    let path = Path::scalar(0.0, 0.25, awkward.clone()).unwrap();
    emit_path_csv(&path, &file).unwrap();
    let back = path_from_table(&read_csv(&file).unwrap(), &file).unwrap();
    for (a, b) in awkward.iter().zip(back.values().unwrap()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(back.dt(), 0.25);
}

#[test]
fn heston_path_has_price_and_variance_columns() {
    let p = HestonParams::new(0.05, 0.3, 1.5, 0.6, -0.6).unwrap();
    let v = simulate_heston(&p, 100.0, 1.5, 1.0 / 252.0, 20, &RandomSource::new(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("h.csv");
    emit_path_csv(&v.joint(), &file).unwrap();
    let t = read_csv(&file).unwrap();
    assert_eq!(t.header, ["t", "log_price", "variance"]);
    assert_eq!(t.rows.len(), 21);
    assert_eq!(t.column("variance").unwrap(), v.variance.values().unwrap());
}

#[test]
fn malformed_csv_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.csv");
    std::fs::write(&file, "t,value\n0,1\n1,oops\n").unwrap();
    assert!(matches!(read_csv(&file), Err(CliError::Csv { .. })));
    std::fs::write(&file, "t,value\n0,1\n1,2\n5,3\n").unwrap();
    let t = read_csv(&file).unwrap();
    assert!(matches!(path_from_table(&t, &file), Err(CliError::Csv { .. })));
}

#[test]
fn writes_leave_no_temporary_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("nested").join("t.csv");
    let mut t = Table::new(&["t", "value"]);
    t.rows.push(vec![0.0, 1.0]);
    emit_csv(&t, &file).unwrap();
    emit_csv(&t, &file).unwrap();
    let names: Vec<_> = std::fs::read_dir(file.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("t.csv")]);
}

fn two_series() -> Vec<Series> {
    let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
    vec![
        Series::new("simulated", x.clone(), x.iter().map(|t| t.sin()).collect()),
        Series::new("reconstructed <fit>", x.clone(), x.iter().map(|t| t.cos()).collect()),
    ]
}

#[test]
fn plot_has_one_polyline_and_legend_entry_per_series() {
    let svg = render_svg(&two_series(), "two lines").unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed XML");
    let count = |tag: &str| doc.descendants().filter(|n| n.has_tag_name(tag)).count();
    assert_eq!(count("polyline"), 2);
    let legend = doc.descendants().filter(|n| n.attribute("class") == Some("legend-entry")).count();
    assert_eq!(legend, 2);
    assert!(doc.descendants().any(|n| n.attribute("class") == Some("axes")));
    let labels: Vec<&str> = doc.descendants().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()).collect();
    assert!(labels.contains(&"reconstructed <fit>"));
}

#[test]
fn plot_bytes_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    emit_plot(&two_series(), "same", &a).unwrap();
    emit_plot(&two_series(), "same", &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn empty_plot_is_a_shape_error() {
    let err = render_svg(&[], "nothing").unwrap_err();
    assert!(matches!(err, CliError::Core(sdefl_core::Error::Shape(_))), "{err}");
    let ragged = [Series::new("x", vec![0.0, 1.0], vec![1.0])];
    assert!(matches!(render_svg(&ragged, "ragged"), Err(CliError::Core(sdefl_core::Error::Shape(_)))));
}
