use relzkp_core::commitment::{commit, embed_color, reveal_verify};
use relzkp_core::field::Field;
use relzkp_core::graph::{generate_with_edge_count, Color, ColoredGraph, Edge, Graph};
use relzkp_core::protocol::{
    one_bad_edge_coloring, play_round, provers, read_transcripts, round_prepare, run_protocol, verifier_challenge,
    verifier_query, CheatStrategy, Inbound, Mode, ProverTape, RejectReason, RoundStreams, RunSettings, Verdict,
};
use relzkp_core::rng::SeededRng;
use relzkp_core::spacetime::{ClockModel, ProverSignaling, SpacetimeConfig};

fn triangle() -> ColoredGraph {
    let g = Graph::new(3, [Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)]).unwrap();
    ColoredGraph::with_witness(g, Color::ALL.to_vec()).unwrap()
}

fn twenty_edges() -> ColoredGraph {
    generate_with_edge_count(10, 20, 1000, &mut SeededRng::derive(11, "graph", 0)).unwrap()
}

fn settings(mode: Mode, seed: u64) -> RunSettings {
    RunSettings {
        mode,
        spacetime: SpacetimeConfig::zero(),
        seed,
        worst_case_timing: false,
    }
}

fn within_sigma(observed: u64, trials: u64, p: f64, k: f64) -> bool {
    let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
    (observed as f64 - trials as f64 * p).abs() <= k * sigma
}

#[test]
fn permutation_choice_is_uniform() {
    let f = Field::preset(8).unwrap();
    let g = triangle();
    let rounds = 60_000u64;
    let mut counts = [0u64; 6];
    for r in 0..rounds {
        let tape = round_prepare(&g, &f, &mut RoundStreams { seed: 1, round: r }.tape()).unwrap();
        counts[tape.pi.index()] += 1;
    }
    for c in counts {
        assert!(within_sigma(c, rounds, 1.0 / 6.0, 5.0), "{counts:?}");
    }
}

#[test]
fn challenge_is_uniform_over_edges() {
    let g = twenty_edges();
    assert_eq!(g.graph().num_edges(), 20);
    let rounds = 20_000u64;
    let mut counts = std::collections::BTreeMap::<Edge, u64>::new();
    for r in 0..rounds {
        let c = verifier_challenge(g.graph(), &mut RoundStreams { seed: 2, round: r }.v2()).unwrap();
        assert!(g.graph().contains_edge(c));
        *counts.entry(c).or_default() += 1;
    }
    assert_eq!(counts.len(), 20);
    for &c in counts.values() {
        assert!(within_sigma(c, rounds, 0.05, 5.0), "{counts:?}");
    }
    let empty = Graph::new(2, []).unwrap();
    assert!(verifier_challenge(&empty, &mut SeededRng::from_seed(0)).is_err());
}

#[test]
fn queries_are_never_zero() {
    let f = Field::preset(3).unwrap();
    let mut rng = SeededRng::from_seed(3);
    let mut seen = 0;
    while seen < 1_000_000 {
        let x = verifier_query(&f, 100, &mut rng);
        assert_eq!(x.len(), 100);
        assert!(x.iter().all(|e| !e.is_zero()));
        seen += x.len();
    }
}

/// Every query and challenge on the triangle over GF(2^3), under every
/// permutation and several key vectors.
#[test]
fn honest_rounds_always_open_correctly() {
    let f = Field::preset(3).unwrap();
    let g = triangle();
    let (mut p1, mut p2) = provers(&g, &f, Mode::Honest).unwrap();
    let mut rng = SeededRng::from_seed(4);
    let nz: Vec<_> = f.elements().filter(|e| !e.is_zero()).collect();
    for pi in relzkp_core::graph::ColorPermutation::ALL {
        for _ in 0..4 {
            let keys: Vec<_> = (0..3).map(|_| f.sample_uniform(&mut rng)).collect();
            for &x0 in &nz {
                for &x1 in &nz {
                    for &x2 in &nz {
                        let x = [x0, x1, x2];
                        for &c in g.graph().edges() {
                            let tape = ProverTape { pi, keys: keys.clone() };
                            p1.prepare(tape.clone());
                            p2.prepare(tape);
                            let a = p1.commit(&x, &mut rng).unwrap();
                            let b = p2.reveal(c, None, &mut rng).unwrap();
                            let (i, j) = c.endpoints();
                            let yi = reveal_verify(&f, x[i as usize], a[i as usize], b[0], None).unwrap();
                            let yj = reveal_verify(&f, x[j as usize], a[j as usize], b[1], None).unwrap();
                            assert_ne!(yi, yj);
                        }
                    }
                }
            }
        }
    }
}

/// `A` over all 6·8^3 tapes for one query, against `a = x·y + b` computed
/// with shift-and-add multiplication.
#[test]
fn commitments_match_bruteforce_oracle() {
    let f = Field::preset(3).unwrap();
    let g = triangle();
    let (mut p1, _) = provers(&g, &f, Mode::Honest).unwrap();
    let oracle_mul = |a: u128, b: u128| {
        let mut acc = 0u128;
        for i in 0..3 {
            if (b >> i) & 1 == 1 {
                acc ^= a << i;
            }
        }
        for bit in (3..5).rev() {
            if (acc >> bit) & 1 == 1 {
                acc ^= 0b1011 << (bit - 3);
            }
        }
        acc
    };
    let x: Vec<_> = [3u128, 6, 7].iter().map(|&v| f.element(v).unwrap()).collect();
    let mut rng = SeededRng::from_seed(0);
    for pi in relzkp_core::graph::ColorPermutation::ALL {
        for idx in 0..512u128 {
            let keys: Vec<_> = (0..3).map(|k| f.element((idx >> (3 * k)) & 7).unwrap()).collect();
            p1.prepare(ProverTape { pi, keys: keys.clone() });
            let a = p1.commit(&x, &mut rng).unwrap();
            for v in 0..3 {
                let y = u128::from(pi.apply(Color::ALL[v]).value());
                assert_eq!(a[v].bits(), oracle_mul(x[v].bits(), y) ^ keys[v].bits());
            }
        }
    }
}

#[test]
fn honest_run_never_rejects() {
    let f = Field::preset(112).unwrap();
    let g = twenty_edges();
    let r = run_protocol(&g, &f, 10_000, &settings(Mode::Honest, 5), None, None).unwrap();
    assert!(r.accept);
    assert_eq!(r.accepts, 10_000);
    let mut testbed = settings(Mode::Honest, 5);
    testbed.spacetime = SpacetimeConfig::testbed();
    testbed.worst_case_timing = true;
    let r = run_protocol(&g, &f, 10_000, &testbed, None, None).unwrap();
    assert_eq!(r.rejects(), 0);
}

#[test]
fn one_bad_edge_rejection_rate() {
    let f = Field::preset(112).unwrap();
    let g = twenty_edges();
    for rounds in [2_000u64, 20_000] {
        let r = run_protocol(&g, &f, rounds, &settings(Mode::Cheat(CheatStrategy::OneBadEdge), 6), None, None).unwrap();
        assert_eq!(r.params.bad_edges, Some(1));
        assert!(!r.accept);
        let rejects = r.rejects();
        assert_eq!(rejects, r.rejects_by_reason[&RejectReason::Monochrome]);
        assert!(within_sigma(rejects, rounds, 1.0 / 20.0, 3.0), "{rejects} of {rounds}");
    }
}

#[test]
fn random_coloring_rejection_rate() {
    let f = Field::preset(16).unwrap();
    let g = twenty_edges();
    let rounds = 20_000;
    let r = run_protocol(&g, &f, rounds, &settings(Mode::Cheat(CheatStrategy::RandomColoring), 7), None, None)
        .unwrap();
    // a uniformly random coloring makes a given edge monochromatic w.p. 1/3
    assert!(within_sigma(r.rejects(), rounds, 1.0 / 3.0, 5.0), "{r:?}");
}

/// Success of the fixed-guess key shift on the bad edge, computed by
/// enumerating every (π(y), x_guess, x) triple.
fn equivocation_success_oracle(f: &Field) -> f64 {
    let nz: Vec<_> = f.elements().filter(|e| !e.is_zero()).collect();
    let (mut wins, mut total) = (0u64, 0u64);
    for y in Color::ALL {
        let target = Color::ALL[(y.value() as usize + 1) % 3];
        let d = f.add(embed_color(f, y).unwrap(), embed_color(f, target).unwrap()).unwrap();
        for &xg in &nz {
            for &x in &nz {
                let b = f.zero();
                let a = commit(f, x, y, b).unwrap();
                let b_shifted = f.add(b, f.mul(xg, d).unwrap()).unwrap();
                // the partner endpoint opens honestly to y
                if matches!(reveal_verify(f, x, a, b_shifted, None), Ok(opened) if opened != y) {
                    wins += 1;
                }
                total += 1;
            }
        }
    }
    wins as f64 / total as f64
}

#[test]
fn equivocation_success_matches_enumeration() {
    let f = Field::preset(3).unwrap();
    let g = triangle();
    let p_win = equivocation_success_oracle(&f);
    assert!(p_win > 0.0 && p_win < 0.5);
    let (_, bad) = one_bad_edge_coloring(g.graph(), g.witness().unwrap()).unwrap();
    let mode = Mode::Cheat(CheatStrategy::Equivocation);
    let mut buf = Vec::new();
    let rounds = 30_000;
    run_protocol(&g, &f, rounds, &settings(mode, 8), Some(&mut buf), None).unwrap();
    let ts = read_transcripts(buf.as_slice(), &f).unwrap();
    let on_bad: Vec<_> = ts.iter().filter(|t| t.c == bad).collect();
    let wins = on_bad.iter().filter(|t| t.verdict == Verdict::Accept).count() as u64;
    assert!(within_sigma(wins, on_bad.len() as u64, p_win, 5.0), "{wins}/{} vs {p_win}", on_bad.len());
    // every other edge opens honestly
    assert!(ts.iter().filter(|t| t.c != bad).all(|t| t.verdict == Verdict::Accept));
}

#[test]
fn relay_attack_is_always_caught_by_timing() {
    let f = Field::preset(112).unwrap();
    let g = twenty_edges();
    for spacetime in [SpacetimeConfig::testbed(), SpacetimeConfig::zero()] {
        let mut s = settings(Mode::Cheat(CheatStrategy::Relay), 9);
        s.spacetime = spacetime;
        let r = run_protocol(&g, &f, 5_000, &s, None, None).unwrap();
        assert_eq!(r.accepts, 0);
        assert_eq!(r.rejects_by_reason[&RejectReason::Timing], 5_000);
    }
}

#[test]
fn provers_see_only_their_own_verifier() {
    let f = Field::preset(16).unwrap();
    let g = twenty_edges();
    let s = settings(Mode::Honest, 10);
    for mode in [
        Mode::Honest,
        Mode::Cheat(CheatStrategy::OneBadEdge),
        Mode::Cheat(CheatStrategy::RandomColoring),
        Mode::Cheat(CheatStrategy::Equivocation),
    ] {
        let (mut p1, mut p2) = provers(&g, &f, mode).unwrap();
        for r in 0..200 {
            let out = play_round(&f, g.graph(), &mut p1, &mut p2, &s, &ClockModel::ideal(), r).unwrap();
            assert_eq!(out.signaling, ProverSignaling::None);
            assert_eq!(p1.inbox(), [Inbound::Query]);
            assert_eq!(p2.inbox(), [Inbound::Challenge]);
        }
    }
    let (mut p1, mut p2) = provers(&g, &f, Mode::Cheat(CheatStrategy::Relay)).unwrap();
    let out = play_round(&f, g.graph(), &mut p1, &mut p2, &s, &ClockModel::ideal(), 0).unwrap();
    assert_eq!(out.signaling, ProverSignaling::RevealRelay);
    assert_eq!(p1.inbox(), [Inbound::Query, Inbound::RelayRequest]);
    assert_eq!(p2.inbox(), [Inbound::Challenge, Inbound::RelayAnswer]);
}

#[test]
fn transcripts_reproduce_commitments_and_carry_two_keys() {
    let f = Field::preset(112).unwrap();
    let g = twenty_edges();
    let seed = 12;
    let mut buf = Vec::new();
    run_protocol(&g, &f, 300, &settings(Mode::Honest, seed), Some(&mut buf), Some(3)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let witness = g.witness().unwrap();
    for (line, t) in text.lines().zip(read_transcripts(text.as_bytes(), &f).unwrap()) {
        let tape = round_prepare(&g, &f, &mut RoundStreams { seed, round: t.round_index }.tape()).unwrap();
        for v in 0..g.graph().num_vertices() {
            let a = commit(&f, t.x[v], tape.pi.apply(witness[v]), tape.keys[v]).unwrap();
            assert_eq!(a, t.a[v]);
        }
        let (i, j) = t.c.endpoints();
        assert_eq!(t.b_c, [tape.keys[i as usize], tape.keys[j as usize]]);
        // the only keys on the wire are the two in B_C
        let json: serde_json::Value = serde_json::from_str(line).unwrap();
        let mut fields: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        fields.sort();
        assert_eq!(fields, ["A", "B_C", "C", "X", "round_index", "t1", "t2", "t3", "t4", "verdict"]);
        assert_eq!(json["B_C"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn transcripts_are_deterministic() {
    let f = Field::preset(112).unwrap();
    let g = twenty_edges();
    let mut s = settings(Mode::Cheat(CheatStrategy::OneBadEdge), 13);
    s.spacetime = SpacetimeConfig::testbed();
    let run = |s: &RunSettings, threads| {
        let mut buf = Vec::new();
        run_protocol(&g, &f, 5_000, s, Some(&mut buf), threads).unwrap();
        buf
    };
    let a = run(&s, Some(1));
    assert_eq!(a, run(&s, None));
    assert_eq!(a, run(&s, Some(4)));
    s.seed = 14;
    assert_ne!(a, run(&s, None));
}
