mod common;

macro_rules! check {
    ($($name:ident),* $(,)?) => {$(
        #[test]
        fn $name() {
            match common::$name() {
                Ok(summary) => println!("{summary}"),
                Err(e) => panic!("{e}"),
            }
        }
    )*};
}

check!(
    fbp_argmax_matches_enumeration,
    scouting_is_unbiased,
    adversary_nesting_is_exact,
    hindsight_matches_grid,
    regret_is_nonnegative,
    episodes_are_deterministic,
    exact_and_float_fbp_agree,
);
