pub mod analyze;
pub mod impute;
pub mod oracle;
pub mod simulate;
