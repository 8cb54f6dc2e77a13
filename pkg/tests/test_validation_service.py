import io
import threading
import wave

import numpy as np
import pytest
from fastapi.testclient import TestClient

from voxmine import audio_seg as aseg
from voxmine import synthetic as sy
from voxmine import validation_service as vs
from voxmine.errors import ConflictError, DataError, NotFoundError
from voxmine.evalkit import Verdict


@pytest.fixture()
def corpus_dir(tmp_path, langs3):
    wav_dir = tmp_path / "wavs"
    wav_dir.mkdir()
    segments = []
    languages = {}
    rng = np.random.default_rng(5)
    for li, lang in enumerate(langs3[:2]):
        for vi in range(2):
            video_id = f"{lang.code}v{vi}"
            samples = sy.speech_over_silence(
                rng, 30.0, [(1.0, 8.0), (11.0, 17.0), (20.0, 27.0)], lang.band_hz
            )
            aseg.write_wav(wav_dir / f"{video_id}.wav", samples)
            segments.extend(aseg.segment_wav(wav_dir / f"{video_id}.wav", video_id))
            languages[video_id] = lang.code
    return wav_dir, segments, languages


def _service(tmp_path, corpus_dir, **kwargs):
    wav_dir, segments, languages = corpus_dir
    catalog = vs.ClipCatalog.from_segments(segments, languages, wav_dir)
    store = vs.LabelStore(tmp_path / "labels.log")
    tokens = {"tok-1": "ann1", "tok-2": "ann2", "tok-3": "ann3"}
    return vs.ValidationService(catalog, store, tokens, **kwargs), catalog, store


def test_create_session_and_errors(tmp_path, corpus_dir, langs3):
    service, catalog, _ = _service(tmp_path, corpus_dir)
    session = service.create_session("tok-1", langs3[0].code, 4)
    assert session.annotator_id == "ann1" and session.issued_clips == []
    with pytest.raises(vs.AuthError):
        service.create_session("bad-token", langs3[0].code, 4)
    with pytest.raises(NotFoundError):
        service.create_session("tok-1", "zz", 4)
    with pytest.raises(DataError):
        service.create_session("tok-1", langs3[0].code, 6)


def test_next_clips_fresh_batch(tmp_path, corpus_dir, langs3):
    service, catalog, _ = _service(tmp_path, corpus_dir)
    session = service.create_session("tok-1", langs3[0].code, 4)
    service.next_clips(session.session_id)
    n_clips = len(catalog.clips_for(langs3[0].code))
    assert len(session.issued_clips) == min(10, n_clips)
    assert len(set(session.issued_clips)) == len(session.issued_clips)


def test_next_clips_prefers_once_labeled(tmp_path, corpus_dir, langs3):
    service, catalog, _ = _service(tmp_path, corpus_dir)
    lang = langs3[0].code
    clips = catalog.clips_for(lang)
    first = service.create_session("tok-2", lang, 5)
    service.next_clips(first.session_id)
    once_labeled = first.issued_clips[:5]
    for seg in once_labeled:
        service.submit_label(first.session_id, seg, Verdict.TARGET_SPEECH)
    second = service.create_session("tok-1", lang, 4)
    service.next_clips(second.session_id)
    overlap = set(second.issued_clips) & set(once_labeled)
    assert len(overlap) == min(3, 5)


def test_issuance_never_repeats_across_sessions(tmp_path, corpus_dir, langs3):
    service, catalog, _ = _service(tmp_path, corpus_dir)
    lang = langs3[0].code
    seen = set()
    for _ in range(5):
        session = service.create_session("tok-1", lang, 3)
        service.next_clips(session.session_id)
        batch = set(session.issued_clips)
        assert not (batch & seen)
        seen |= batch
        if session.exhausted:
            break
    assert seen == set(catalog.clips_for(lang))


def test_exhaustion_flag(tmp_path, corpus_dir, langs3):
    service, catalog, _ = _service(tmp_path, corpus_dir)
    lang = langs3[0].code
    session = service.create_session("tok-1", lang, 3)
    while True:
        service.next_clips(session.session_id)
        if session.exhausted:
            break
        for seg in session.issued_clips:
            service.submit_label(session.session_id, seg, Verdict.TARGET_SPEECH)
    assert session.issued_clips == []
    labeled = service.store.labeled_by("ann1")
    assert labeled == set(catalog.clips_for(lang))


def test_submit_label_rules(tmp_path, corpus_dir, langs3):
    service, _, _ = _service(tmp_path, corpus_dir)
    session = service.create_session("tok-1", langs3[0].code, 4)
    service.next_clips(session.session_id)
    seg = session.issued_clips[0]
    service.submit_label(session.session_id, seg, Verdict.TARGET_SPEECH)
    with pytest.raises(ConflictError):
        service.submit_label(session.session_id, seg, Verdict.NON_SPEECH)
    with pytest.raises(DataError):
        service.submit_label(session.session_id, "never-issued", Verdict.UNSURE)


def test_concurrent_duplicate_submits_store_once(tmp_path, corpus_dir, langs3):
    service, _, store = _service(tmp_path, corpus_dir)
    session = service.create_session("tok-1", langs3[0].code, 4)
    service.next_clips(session.session_id)
    seg = session.issued_clips[0]
    results = []
    barrier = threading.Barrier(100)

    def submit():
        barrier.wait()
        try:
            service.submit_label(session.session_id, seg, Verdict.TARGET_SPEECH)
            results.append("ok")
        except ConflictError:
            results.append("conflict")

    threads = [threading.Thread(target=submit) for _ in range(100)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results.count("ok") == 1
    assert results.count("conflict") == 99
    assert len([l for l in store.labels() if l.segment_id == seg]) == 1


def test_store_replay_reproduces_stats(tmp_path, corpus_dir, langs3):
    service, catalog, store = _service(tmp_path, corpus_dir)
    lang = langs3[0].code
    for token in ("tok-1", "tok-2"):
        session = service.create_session(token, lang, 4)
        service.next_clips(session.session_id)
        for i, seg in enumerate(session.issued_clips):
            verdict = [Verdict.TARGET_SPEECH, Verdict.OTHER_LANGUAGE, Verdict.UNSURE][i % 3]
            service.submit_label(session.session_id, seg, verdict)
    stats_before = service.language_stats(lang)
    store.close()

    reopened = vs.LabelStore(tmp_path / "labels.log")
    service2 = vs.ValidationService(catalog, reopened, {"tok-1": "ann1"})
    stats_after = service2.language_stats(lang)
    assert stats_after == stats_before


def test_language_stats_matches_evalkit(tmp_path, corpus_dir, langs3):
    from voxmine import evalkit

    service, catalog, store = _service(tmp_path, corpus_dir)
    lang = langs3[0].code
    session = service.create_session("tok-1", lang, 4)
    service.next_clips(session.session_id)
    for seg in session.issued_clips[:4]:
        service.submit_label(session.session_id, seg, Verdict.TARGET_SPEECH)
    stats = service.language_stats(lang)
    segment_ids = set(catalog.clips_for(lang))
    labels = [l for l in store.labels() if l.segment_id in segment_ids]
    dist = evalkit.label_distribution(labels)
    assert stats["counts"][Verdict.TARGET_SPEECH.value] == dist.counts[Verdict.TARGET_SPEECH]
    assert stats["total_labels"] == 4
    assert stats["over_50_labels"] is False


def test_language_stats_empty_language(tmp_path, corpus_dir, langs3):
    service, _, _ = _service(tmp_path, corpus_dir)
    stats = service.language_stats(langs3[1].code)
    assert stats["total_labels"] == 0
    assert stats["over_50_labels"] is False
    assert stats["agreement"] is None


def test_language_stats_over_50_flag(tmp_path, corpus_dir, langs3):
    from voxmine.evalkit import CrowdLabel

    service, catalog, store = _service(tmp_path, corpus_dir)
    lang = langs3[0].code
    clips = catalog.clips_for(lang)
    count = 0
    annotator = 0
    while count < 51:
        annotator += 1
        for seg in clips:
            if count >= 51:
                break
            store.append(CrowdLabel(seg, f"bulk{annotator}", Verdict.TARGET_SPEECH, 3, float(count)))
            count += 1
    stats = service.language_stats(lang)
    assert stats["total_labels"] == 51
    assert stats["over_50_labels"] is True


# --------------------------------------------------------------------------
# HTTP surface
# --------------------------------------------------------------------------


@pytest.fixture()
def client(tmp_path, corpus_dir):
    service, catalog, store = _service(tmp_path, corpus_dir)
    app = vs.create_app(service)
    return TestClient(app), catalog


def _auth(token="tok-1"):
    return {"Authorization": f"Bearer {token}"}


def test_http_languages(client, langs3):
    http, catalog = client
    resp = http.get("/languages")
    assert resp.status_code == 200
    assert resp.json()["languages"] == catalog.languages()


def test_http_full_flow(client, langs3):
    http, _ = client
    resp = http.post("/sessions", json={"language": langs3[0].code, "proficiency": 4}, headers=_auth())
    assert resp.status_code == 200
    sid = resp.json()["session_id"]
    clips = http.get(f"/sessions/{sid}/clips").json()
    assert clips["clips"] and not clips["exhausted"]
    seg = clips["clips"][0]["segment_id"]

    audio = http.get(clips["clips"][0]["audio_url"])
    assert audio.status_code == 200
    with wave.open(io.BytesIO(audio.content)) as wf:
        assert wf.getnchannels() == 1 and wf.getframerate() == 16000
        assert wf.getnframes() > 16000  # at least 1 s

    resp = http.post(f"/sessions/{sid}/labels", json={"segment_id": seg, "verdict": "target_speech"})
    assert resp.status_code == 200
    dup = http.post(f"/sessions/{sid}/labels", json={"segment_id": seg, "verdict": "target_speech"})
    assert dup.status_code == 409
    stats = http.get(f"/stats/{langs3[0].code}")
    assert stats.status_code == 200
    assert stats.json()["total_labels"] == 1


def test_http_auth_and_validation_errors(client, langs3):
    http, _ = client
    assert http.post("/sessions", json={"language": langs3[0].code, "proficiency": 4}).status_code == 401
    assert (
        http.post("/sessions", json={"language": "zz", "proficiency": 4}, headers=_auth()).status_code
        == 404
    )
    assert (
        http.post(
            "/sessions", json={"language": langs3[0].code, "proficiency": 9}, headers=_auth()
        ).status_code
        == 400
    )
    resp = http.post("/sessions", json={"language": langs3[0].code, "proficiency": 4}, headers=_auth())
    sid = resp.json()["session_id"]
    bad = http.post(f"/sessions/{sid}/labels", json={"segment_id": "x", "verdict": "nonsense"})
    assert bad.status_code == 400
    assert http.get("/sessions/nope/clips").status_code == 404
    assert http.get("/clips/ghost/audio").status_code == 404
