//! Envy-free cake cutting, rental harmony and greedy disproportionate division.

pub mod cake;
pub mod greedy;
pub mod rent;

pub use cake::{cake_result_from_cell, envy_free_cake, CakeAllocation, CakePartition, CakePlayers, CakeValuation, PlayerCover};
pub use greedy::{greedy_division, GreedyDivision};
pub use rent::{rental_harmony, rent_result_from_cell, QuasilinearCover, RentalInstance, RentalResult};
