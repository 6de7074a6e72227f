use ianet::network::{layout_with_n, NetworkConfig};

// Sweeps rely on the first k pairs of an instance not depending on n.
#[test]
fn layouts_nest_across_n() {
    let cfg = NetworkConfig::standard_dense(0, 1);
    let a = layout_with_n(&cfg, 3, 5).unwrap();
    let b = layout_with_n(&cfg, 6, 5).unwrap();
    assert_eq!(a.tx[..], b.tx[..3]);
    assert_eq!(a.rx[..], b.rx[..3]);
}
