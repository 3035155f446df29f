use chfgap::asymptotics::{Mode, Model, ModelOptions};
use chfgap::nystrom::fredholm_log_det;
use chfgap::par;
use chfgap::szego::KernelParams;

fn run() -> (f64, Vec<f64>, Vec<f64>) {
    let kp = KernelParams::new(0.4, -0.3).unwrap();
    let m = Model::build(&[-2.0, -0.9, -0.3, 1.4], kp, ModelOptions::default()).unwrap();
    let det = fredholm_log_det(&m.sys, &m.kp, 6.0, 48, 1e-6)
        .unwrap()
        .log_det;
    let hats = m.l_hats(true).iter().map(|a| a.value).collect();
    let totals = m
        .expansion(&[3.0, 5.0, 7.0], Mode::General)
        .unwrap()
        .rows
        .iter()
        .map(|r| r.total)
        .collect();
    (det, hats, totals)
}

// One test per binary: the sequential switch is process-global.
#[test]
fn sequential_and_parallel_agree_bitwise() {
    par::set_sequential(false);
    let a = run();
    par::set_sequential(true);
    assert!(!par::is_parallel());
    let b = run();
    par::set_sequential(false);
    assert_eq!(a, b);
}
