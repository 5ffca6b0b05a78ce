pub mod conv;
pub mod elementwise;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod recurrent;
pub mod residual;
pub mod shape;
