use num_traits::Zero;
use relzkp_core::field::{Field, FieldSpec};
use relzkp_core::graph::{Color, ColoredGraph, Edge, Graph};
use relzkp_core::zksim::{enumerate_real_distribution, enumerate_sim_distribution, tv_distance, zk_equality_check};

fn triangle() -> ColoredGraph {
    let g = Graph::new(3, [Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)]).unwrap();
    ColoredGraph::with_witness(g, Color::ALL.to_vec()).unwrap()
}

#[test]
fn triangle_over_gf8_is_perfectly_simulated() {
    let f = Field::preset(3).unwrap();
    let report = zk_equality_check(&triangle(), &f).unwrap();
    assert_eq!(report.instances.len(), 343 * 3);
    assert!(report.instances.iter().all(|i| i.tv == "0"));
    assert!(report.pass);
    assert_eq!(report.max_tv, "0");
}

#[test]
fn four_cycle_over_gf4_is_perfectly_simulated() {
    let f = Field::new(FieldSpec::new(2, 0b111).unwrap()).unwrap();
    let g = Graph::new(4, [Edge::new(0, 1), Edge::new(1, 2), Edge::new(2, 3), Edge::new(0, 3)]).unwrap();
    let c = Color::ALL;
    let g = ColoredGraph::with_witness(g, vec![c[0], c[1], c[2], c[1]]).unwrap();
    let report = zk_equality_check(&g, &f).unwrap();
    assert_eq!(report.instances.len(), 81 * 4);
    assert!(report.pass);
}

/// Revealing a vertex's key outside the challenged edge would leak its color:
/// the metric must see that.
#[test]
fn tv_detects_a_leaky_view() {
    let f = Field::preset(3).unwrap();
    let g = triangle();
    let x: Vec<_> = [1u128, 2, 3].iter().map(|&v| f.element(v).unwrap()).collect();
    let c = Edge::new(0, 1);
    let real = enumerate_real_distribution(&g, &f, &x, c).unwrap();
    let sim = enumerate_sim_distribution(g.graph(), &f, &x, c).unwrap();
    assert!(tv_distance(&real, &sim).unwrap().is_zero());

    // a "simulator" that always opens the edge to colors (0, 1) differs from
    // the real π-randomized openings
    let mut skewed = sim.clone();
    skewed.counts.clear();
    for (k, &n) in &sim.counts {
        let e = |b: u128| f.element(b).unwrap();
        let open = |v: usize, b: u128| f.div(f.add(e(k[v]), e(b)).unwrap(), x[v]).unwrap().bits();
        if open(0, k[3]) == 0 && open(1, k[4]) == 1 {
            *skewed.counts.entry(k.clone()).or_insert(0) += n * 6;
        }
    }
    let tv = tv_distance(&real, &skewed).unwrap();
    assert_eq!(tv.to_string(), "5/6");
}
