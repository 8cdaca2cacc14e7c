use lane_emden_web::Lab;

#[test]
fn solve_levels_and_sweep() {
    let mut lab = Lab::create("ball", std::f64::consts::FRAC_PI_4, 0.0, 0.08).unwrap();
    assert_eq!(lab.vertices().len() % 2, 0);
    assert_eq!(lab.triangles().len() % 3, 0);
    assert!(lab.try_levels(&[0.5]).is_err());
    let n = lab.vertices().len() / 2;
    let u = lab.try_solve(2.0).unwrap();
    assert_eq!(u.len(), n);
    assert!(lab.report().unwrap().contains("\"max_value\""));

    let levels: serde_json::Value = serde_json::from_str(&lab.try_levels(&[0.25, 0.75]).unwrap()).unwrap();
    for l in levels.as_array().unwrap() {
        assert_eq!(l["convex"], true);
        assert!(!l["points"].as_array().unwrap().is_empty());
    }

    let sweep: serde_json::Value = serde_json::from_str(&lab.try_sweep(&[0.9, 0.99, 1.01, 1.1]).unwrap()).unwrap();
    let d: Vec<f64> = sweep["points"].as_array().unwrap().iter().map(|p| p["distance"].as_f64().unwrap()).collect();
    assert!(d[1] < d[0] && d[2] < d[3]);
}

#[test]
fn rejects_bad_domains() {
    assert!(Lab::create("ball", 2.2, 0.0, 0.1).is_err());
    assert!(Lab::create("square", 0.5, 0.5, 0.1).is_err());
    assert!(Lab::create("ellipse", 0.7, 0.5, 0.001).is_err());
    assert!(Lab::create("ellipse", 0.7, 0.5, 0.1).is_ok());
}
