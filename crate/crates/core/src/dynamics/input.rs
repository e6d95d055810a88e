/// Total input current (mV) for one neuron and step: the synaptic weights
/// due now, summed in delivery order, plus the external events at weight
/// `external_weight`.
///
/// The rank engine keeps a running per-neuron sum of the same weights in the
/// same order and adds the external term last, so both paths round
/// identically.
pub fn accumulate_input<I>(synaptic_weights: I, external_events: u32, external_weight: f32) -> f64
where
    I: IntoIterator<Item = f32>,
{
    let mut acc = 0.0f64;
    for w in synaptic_weights {
        acc += f64::from(w);
    }
    acc + f64::from(external_events) * f64::from(external_weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(accumulate_input([], 0, 0.45), 0.0);
    }

    #[test]
    fn mixed_internal_and_external() {
        let got = accumulate_input([0.4, 0.4], 1, 0.5);
        assert!((got - 1.3).abs() < 1e-6, "{got}");
    }

    proptest! {
        #[test]
        fn equals_scalar_sum(ws in prop::collection::vec(-2.0f32..2.0, 0..40), ev in 0u32..10, we in 0.0f32..1.0) {
            let mut oracle = 0.0f64;
            for w in &ws {
                oracle += *w as f64;
            }
            for _ in 0..ev {
                oracle += we as f64;
            }
            let got = accumulate_input(ws.iter().copied(), ev, we);
            prop_assert!((got - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()));
        }
    }
}
