use propset_bench::{heat, mumford, ou};

#[test]
fn fixtures_build_and_anchor_x0() {
    for case in [heat(), ou(), mumford()] {
        let grid = case.grid(0.1);
        let cell = grid.locate(&case.x0).unwrap();
        assert!(grid.is_inside(cell), "{}", case.name);
        assert_eq!(grid.center(cell), case.x0, "{}", case.name);
    }
    let (l, x0, k) = heat().discrete(0.05, &[0.0, -0.5], 0.25);
    assert!(!l.is_boundary(x0));
    assert_eq!(k.len(), 11 * 11);
}
