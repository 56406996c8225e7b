//! File format round trips and determinism of the writers.

use nalgebra::Vector3;
use patchshade::{
    derive_from_scene, read_tensor_file, solve_generic, write_tensor_file, DerivTensor,
    ImageTensors, PatchGrid, Scene,
};

fn temp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("patchshade_fmt_{name}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn tensor_exchange_roundtrip_scalar_and_vector() {
    let dir = temp_dir("exchange");
    let path = dir.join("t.json");

    let scalars = vec![
        DerivTensor::scalar(0, vec![0.5]),
        DerivTensor::scalar(1, vec![1.0, -2.0]),
        DerivTensor::scalar(2, vec![0.25, 0.0, -0.75]),
    ];
    write_tensor_file(&path, &scalars).unwrap();
    assert_eq!(read_tensor_file(&path).unwrap(), scalars);

    let vectors = vec![
        DerivTensor::vector(1, vec![Vector3::new(1.0, 0.0, -1.0), Vector3::new(0.5, 2.0, 0.0)]),
        DerivTensor::vector(
            2,
            vec![
                Vector3::new(0.1, 0.2, 0.3),
                Vector3::zeros(),
                Vector3::new(-1.0, -2.0, -3.0),
            ],
        ),
    ];
    write_tensor_file(&path, &vectors).unwrap();
    assert_eq!(read_tensor_file(&path).unwrap(), vectors);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tensor_exchange_has_documented_shape() {
    let dir = temp_dir("shape");
    let path = dir.join("t.json");
    write_tensor_file(&path, &[DerivTensor::scalar(1, vec![3.0, 4.0])]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["order"], 1);
    assert_eq!(value["value_dim"], 1);
    assert_eq!(value["tensors"][0]["j"], 1);
    assert_eq!(value["tensors"][0]["entries"]["1,0"], 3.0);
    assert_eq!(value["tensors"][0]["entries"]["0,1"], 4.0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn image_tensors_roundtrip_and_shape() {
    let dir = temp_dir("image");
    let path = dir.join("it.json");
    let scene = Scene::cylinder(1.0);
    let f = scene.height_jet(5).unwrap();
    let it = derive_from_scene(&f, &Vector3::new(0.0, 0.6, 0.8), 4).unwrap();
    it.write_json(&path).unwrap();
    let back = ImageTensors::read_json(&path).unwrap();
    assert_eq!(it, back);

    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(value["i0"].is_number());
    assert_eq!(value["value_dim"], 1);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_files_are_rejected_with_context() {
    let dir = temp_dir("malformed");

    let path = dir.join("bad_key.json");
    std::fs::write(
        &path,
        r#"{"order":1,"value_dim":1,"tensors":[{"j":1,"entries":{"1;0":1.0,"0,1":2.0}}]}"#,
    )
    .unwrap();
    assert!(read_tensor_file(&path).is_err());

    let path = dir.join("bad_count.json");
    std::fs::write(
        &path,
        r#"{"order":2,"value_dim":1,"tensors":[{"j":2,"entries":{"2,0":1.0}}]}"#,
    )
    .unwrap();
    assert!(read_tensor_file(&path).is_err());

    let path = dir.join("bad_grid.grid");
    std::fs::write(&path, "4 4 0.1\n1 2 3\n").unwrap();
    assert!(PatchGrid::read(&path).is_err());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn writers_are_deterministic() {
    let dir = temp_dir("determinism");
    let scene = Scene::cylinder(1.0);
    let f = scene.height_jet(6).unwrap();
    let it = derive_from_scene(&f, &Vector3::new(0.0, 0.6, 0.8), 5).unwrap();
    let sol = solve_generic(&it, 0.25, 0.75).unwrap();

    let a = dir.join("a.json");
    let b = dir.join("b.json");
    sol.write_json(&a).unwrap();
    sol.write_json(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let ga = dir.join("a.grid");
    let gb = dir.join("b.grid");
    let grid = PatchGrid::from_fn_scalar(9, 9, 0.0625, |x, y| scene.image(x, y, &Vector3::new(0.0, 0.6, 0.8))).unwrap();
    grid.write(&ga).unwrap();
    grid.write(&gb).unwrap();
    assert_eq!(std::fs::read(&ga).unwrap(), std::fs::read(&gb).unwrap());
    std::fs::remove_dir_all(&dir).ok();
}
