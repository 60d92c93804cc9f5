use tlstark::estimation::{fit_alpha, FitOptions};
use tlstark::io::{read_campaign, write_campaign, SyntheticTruth};
use tlstark::model::MoleculeSpecies;
use tlstark::synth::*;

#[test]
fn written_campaign_fits_like_the_original() {
    let model = reference_model(MoleculeSpecies::c60());
    let vis = reference_visibility();
    let protocol = ScanProtocol::standard(model.grating_period());
    let noise = NoiseModel::shot_noise(1e4, 5);
    let campaign = synthesize_campaign(&model, 88.9, &reference_settings(), &vis, &protocol, &noise).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let truth = SyntheticTruth { alpha_vol: 88.9, noise };
    let manifest = write_campaign(dir.path(), &campaign, Some(&vis), Some(truth.clone())).unwrap();
    assert_eq!(manifest.settings.len(), 3);
    assert_eq!(manifest.settings[0].scans.len(), 27);

    let (back, manifest_back, vis_back) = read_campaign(dir.path()).unwrap();
    assert_eq!(manifest_back, manifest);
    assert_eq!(manifest_back.truth, Some(truth));
    assert_eq!(vis_back.as_ref(), Some(&vis));
    for (a, b) in back.settings.iter().zip(&campaign.settings) {
        for (sa, sb) in a.scans.iter().zip(&b.scans) {
            assert_eq!(sa.counts, sb.counts);
            assert_eq!((sa.voltage, sa.sequence, sa.role), (sb.voltage, sb.sequence, sb.role));
        }
    }
    let a = fit_alpha(&campaign, &vis, &FitOptions::default()).unwrap();
    let b = fit_alpha(&back, &vis_back.unwrap(), &FitOptions::default()).unwrap();
    assert!((a.alpha_vol / b.alpha_vol - 1.0).abs() < 1e-9);
}

#[test]
fn rewriting_is_byte_identical() {
    let model = reference_model(MoleculeSpecies::c70());
    let vis = reference_visibility();
    let protocol = ScanProtocol::standard(model.grating_period());
    let noise = NoiseModel::shot_noise(1e3, 8);
    let settings = &reference_settings()[..1];
    let campaign = synthesize_campaign(&model, 108.5, settings, &vis, &protocol, &noise).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_campaign(d1.path(), &campaign, Some(&vis), None).unwrap();
    write_campaign(d2.path(), &campaign, Some(&vis), None).unwrap();
    for entry in std::fs::read_dir(d1.path().join("scans")).unwrap() {
        let p = entry.unwrap().path();
        let q = d2.path().join("scans").join(p.file_name().unwrap());
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    }
    assert_eq!(
        std::fs::read(d1.path().join("manifest.json")).unwrap(),
        std::fs::read(d2.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn missing_reference_is_a_protocol_error() {
    let model = reference_model(MoleculeSpecies::c60());
    let vis = reference_visibility();
    let protocol = ScanProtocol::standard(model.grating_period());
    let campaign = synthesize_campaign(&model, 88.9, &reference_settings()[..1], &vis, &protocol, &NoiseModel::noiseless(100.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = write_campaign(dir.path(), &campaign, None, None).unwrap();
    manifest.settings[0].scans.pop();
    tlstark::io::write_json(&dir.path().join("manifest.json"), &manifest).unwrap();
    let err = read_campaign(dir.path()).unwrap_err();
    assert!(matches!(err, tlstark::error::Error::Protocol(_)), "{err}");
}
