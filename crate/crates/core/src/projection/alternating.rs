//! Cycle through several single-invariant projections, one per step.

use super::{PostStep, StepContext};
use crate::error::{Error, Result};
use crate::system::Cost;

/// Applies member `n mod m` after the `n`-th accepted step (counting from 0),
/// so every member fires exactly once in any `m` consecutive steps.
pub struct AlternatingProjection {
    members: Vec<Box<dyn PostStep>>,
    name: String,
}

impl AlternatingProjection {
    pub fn new(members: Vec<Box<dyn PostStep>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("alternating projection needs at least one member".into()));
        }
        let names: Vec<&str> = members.iter().map(|m| m.name()).collect();
        let name = format!("alternating[{}]", names.join(","));
        Ok(Self { members, name })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Index of the member that handles step `step_index`.
    pub fn member_for(&self, step_index: u64) -> usize {
        (step_index % self.members.len() as u64) as usize
    }
}

impl PostStep for AlternatingProjection {
    fn apply(&mut self, ctx: &StepContext<'_>, candidate: &mut [f64], cost: &mut Cost) -> Result<()> {
        let i = self.member_for(ctx.step_index);
        self.members[i].apply(ctx, candidate, cost)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    struct Recorder(usize, Arc<Mutex<Vec<usize>>>);

    impl PostStep for Recorder {
        fn apply(&mut self, _: &StepContext<'_>, _: &mut [f64], cost: &mut Cost) -> Result<()> {
            cost.projection_evals += 1;
            self.1.lock().unwrap().push(self.0);
            Ok(())
        }

        fn name(&self) -> &str {
            "rec"
        }
    }

    #[test]
    fn members_fire_cyclically() {
        let log = Arc::new(Mutex::new(Vec::new()));
        let members: Vec<Box<dyn PostStep>> =
            (0..3).map(|i| Box::new(Recorder(i, log.clone())) as Box<dyn PostStep>).collect();
        let mut alt = AlternatingProjection::new(members).unwrap();
        let prev = [0.0];
        let mut cost = Cost::default();
        for n in 0..7 {
            let ctx = StepContext { step_index: n, t: 0.0, h: 0.1, previous: &prev };
            alt.apply(&ctx, &mut [0.0], &mut cost).unwrap();
        }
        assert_eq!(*log.lock().unwrap(), vec![0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(cost.projection_evals, 7);
    }

    #[test]
    fn empty_list_rejected() {
        assert!(AlternatingProjection::new(Vec::new()).is_err());
    }
}
