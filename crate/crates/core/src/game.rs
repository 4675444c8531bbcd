//! A fully discretized game instance: model, grids, terminal utility, and
//! initial distribution, validated together.

use crate::error::{Error, Result};
use crate::grid::{ActionGrid, TimeGrid, WealthGrid};
use crate::initial::InitialWealth;
use crate::model::{ModelParams, UtilitySpec};

/// Everything a solver needs about one discretized game, with the terminal
/// utility and initial distribution already evaluated on the wealth grid.
#[derive(Debug, Clone)]
pub struct GameInstance {
    params: ModelParams,
    time: TimeGrid,
    wealth: WealthGrid,
    actions: ActionGrid,
    utility: UtilitySpec,
    init: InitialWealth,
    phi: Vec<f64>,
    mu0: Vec<f64>,
}

impl GameInstance {
    /// Bundles and cross-validates the pieces of a discretized game.
    pub fn new(
        params: ModelParams,
        time: TimeGrid,
        wealth: WealthGrid,
        actions: ActionGrid,
        utility: UtilitySpec,
        init: InitialWealth,
    ) -> Result<Self> {
        params.validate()?;
        if actions.bound() != params.a_max {
            return Err(Error::InvalidParams(format!(
                "action grid tops out at {} but the model bound is {}",
                actions.bound(),
                params.a_max
            )));
        }
        let phi = utility.on_grid(&wealth)?;
        let mu0 = init.project(&wealth)?;
        Ok(Self {
            params,
            time,
            wealth,
            actions,
            utility,
            init,
            phi,
            mu0,
        })
    }

    /// The same game on a different time grid; used by the refinement study.
    pub fn with_time(&self, time: TimeGrid) -> Result<Self> {
        let mut game = self.clone();
        game.time = time;
        Ok(game)
    }

    #[must_use]
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    #[must_use]
    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    #[must_use]
    pub fn wealth(&self) -> &WealthGrid {
        &self.wealth
    }

    #[must_use]
    pub fn actions(&self) -> &ActionGrid {
        &self.actions
    }

    #[must_use]
    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }

    #[must_use]
    pub fn init(&self) -> &InitialWealth {
        &self.init
    }

    /// Terminal utility on the wealth grid.
    #[must_use]
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Initial distribution on the wealth grid.
    #[must_use]
    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn game_instance_cross_checks_the_bound() {
        let params = ModelParams::default();
        let time = TimeGrid::new(1, 2).unwrap();
        let wealth = WealthGrid::uniform(0.0, 20.0, 33).unwrap();
        let actions = ActionGrid::uniform(5.0, 6).unwrap();
        let err = GameInstance::new(
            params,
            time,
            wealth.clone(),
            actions,
            UtilitySpec::CrraSqrt,
            InitialWealth::Dirac { x: 10.0 },
        );
        assert!(err.is_err());
        let actions = ActionGrid::uniform(10.0, 6).unwrap();
        let game = GameInstance::new(
            params,
            time,
            wealth,
            actions,
            UtilitySpec::CrraSqrt,
            InitialWealth::Dirac { x: 10.0 },
        )
        .unwrap();
        assert_eq!(game.phi().len(), 33);
        let total: f64 = game.mu0().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
