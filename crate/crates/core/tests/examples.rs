macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(
    shrinkage_regression,
    shrinkage_regression_runs,
    "shrinkage_regression.rs"
);
example!(tree_ensembles, tree_ensembles_run, "tree_ensembles.rs");
example!(svr_kernels, svr_kernels_run, "svr_kernels.rs");
example!(arima_benchmark, arima_benchmark_runs, "arima_benchmark.rs");
example!(
    cross_validation,
    cross_validation_runs,
    "cross_validation.rs"
);
example!(
    forecast_evaluation,
    forecast_evaluation_runs,
    "forecast_evaluation.rs"
);
example!(
    shap_attribution,
    shap_attribution_runs,
    "shap_attribution.rs"
);
example!(
    functional_forms,
    functional_forms_run,
    "functional_forms.rs"
);
example!(end_to_end, end_to_end_runs, "end_to_end.rs");
