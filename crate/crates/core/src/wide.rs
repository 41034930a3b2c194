use nalgebra::DMatrix;
pub type Wide = qd::Quad;
pub fn t() -> DMatrix<Wide> {
    let a = DMatrix::<Wide>::from_element(3, 3, Wide::from_f64(1.5));
    let b = &a * a.transpose() - &a + a.clone() * Wide::from_f64(2.0);
    b
}
