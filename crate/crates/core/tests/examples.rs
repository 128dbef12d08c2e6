macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $name() {
            $name::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(track_stream, "track_stream.rs");
example!(trajectories_vs_theory, "trajectories_vs_theory.rs");
example!(closed_form, "closed_form.rs");
example!(petrels_ode, "petrels_ode.rs");
example!(phase_portrait, "phase_portrait.rs");
example!(phase_map, "phase_map.rs");
example!(finite_sample_rate, "finite_sample_rate.rs");
example!(toy_scaling, "toy_scaling.rs");
