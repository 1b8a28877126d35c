use gridfold::config::{ExperimentConfig, Override};
use gridfold::formats::{graph_from_str, graph_to_string};
use gridfold::smallworld::smallworld_graph;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_dump_reload_is_exact(side in 1u32..20, k in 0u32..4, seed: u64) {
        let g = smallworld_graph(side, k, seed).unwrap();
        let text = graph_to_string(&g);
        let back = graph_from_str(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(graph_to_string(&back), text);
    }

    #[test]
    fn command_line_beats_file(file_seed: u32, cli_seed: u32, delta in 0.0f64..1.0) {
        let text = format!("seed = {file_seed}\ndelta = {delta:?}\n");
        let from_file = ExperimentConfig::from_sources(Some(&text), &[]).unwrap();
        prop_assert_eq!(from_file.seed, file_seed as u64);
        prop_assert_eq!(from_file.delta, delta);
        let o: Override = format!("seed={cli_seed}").parse().unwrap();
        let layered = ExperimentConfig::from_sources(Some(&text), &[o]).unwrap();
        prop_assert_eq!(layered.seed, cli_seed as u64);
        prop_assert_eq!(layered.delta, delta);
        prop_assert_eq!(layered.digest() == from_file.digest(), file_seed == cli_seed);
    }
}
