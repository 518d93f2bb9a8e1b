//! Every example runs to completion.

mod brackets {
    include!("../examples/brackets.rs");
}

mod conic_coordinates {
    include!("../examples/conic_coordinates.rs");
}

mod divergences {
    include!("../examples/divergences.rs");
}

mod error_curves {
    include!("../examples/error_curves.rs");
}

mod likelihood_ratio_test {
    include!("../examples/likelihood_ratio_test.rs");
}

mod mixture_evidence {
    include!("../examples/mixture_evidence.rs");
}

mod order_estimates {
    include!("../examples/order_estimates.rs");
}

mod rate_constants {
    include!("../examples/rate_constants.rs");
}

mod run_config {
    include!("../examples/run_config.rs");
}

#[test]
fn examples_run() {
    brackets::run_example().unwrap();
    conic_coordinates::run_example().unwrap();
    divergences::run_example().unwrap();
    error_curves::run_example().unwrap();
    likelihood_ratio_test::run_example().unwrap();
    mixture_evidence::run_example().unwrap();
    order_estimates::run_example().unwrap();
    rate_constants::run_example().unwrap();
    run_config::run_example().unwrap();
}
