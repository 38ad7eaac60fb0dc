#include <doctest.h>

#include "fixture.hpp"

#include <spock/crypto.hpp>
#include <spock/error.hpp>

#include <random>
#include <sys/stat.h>

using namespace spock;
using spock::test::TempDir;

namespace {

Bytes from_hex_bytes(std::string_view hex) {
    Bytes out;
    for (std::size_t i = 0; i < hex.size(); i += 2) out.push_back(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16));
    return out;
}

std::string hex_of(const Bytes& b) {
    static const char* d = "0123456789abcdef";
    std::string out;
    for (auto c : b) {
        out += d[c >> 4];
        out += d[c & 15];
    }
    return out;
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes b(n);
    for (auto& c : b) c = static_cast<std::uint8_t>(rng());
    return b;
}

} // namespace

TEST_SUITE("crypto") {

TEST_CASE("sha-256 reference vectors") {
    // Cross-checked with Python's hashlib (tools/oracles.py).
    CHECK(digest("").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(digest("abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(digest("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").hex() ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("digest is a pure function") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10000; ++i) {
        auto b = random_bytes(rng, rng() % 96);
        auto a = digest(ByteView(b));
        CHECK(a == digest(ByteView(b)));
        CHECK(Digest::is_valid_hex(a.hex()));
    }
}

TEST_CASE("digest hex parsing") {
    auto d = digest("abc");
    CHECK(Digest::from_hex(d.hex()) == d);
    CHECK_FALSE(Digest::try_from_hex(""));
    CHECK_FALSE(Digest::try_from_hex(std::string(63, 'a')));
    CHECK_FALSE(Digest::try_from_hex(std::string(64, 'A')));
    CHECK_FALSE(Digest::try_from_hex(std::string(64, 'g')));
    CHECK_THROWS_AS(Digest::from_hex("xyz"), Error);
    CHECK(d.prefix() == "ba7816bf8f01");
    CHECK(d.prefix(5) == "ba781");
}

TEST_CASE("base64 reference vectors") {
    const std::pair<const char*, const char*> vectors[] = {
        {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"},
        {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
    };
    for (auto [plain, enc] : vectors) {
        CHECK(encode_text(std::string_view(plain)) == enc);
        auto dec = decode_text(enc);
        CHECK(std::string(dec.begin(), dec.end()) == plain);
    }
}

TEST_CASE("base64 decoding is strict") {
    CHECK_THROWS_AS(decode_text("!!!!"), Error);
    CHECK_FALSE(try_decode_text("Zg="));     // bad length
    CHECK_FALSE(try_decode_text("Zh=="));    // non-canonical trailing bits
    CHECK_FALSE(try_decode_text("Zm9v\n"));  // whitespace
    CHECK_FALSE(try_decode_text("Z==="));
    CHECK_FALSE(try_decode_text("=Zm9"));
    CHECK_FALSE(try_decode_text("Zm=v"));
    CHECK_FALSE(try_decode_text("Zm9-"));    // url-safe alphabet
}

TEST_CASE("base64 round-trips random data") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        auto b = random_bytes(rng, rng() % 70);
        auto enc = encode_text(ByteView(b));
        CHECK(decode_text(enc) == b);
        CHECK(encode_text(ByteView(decode_text(enc))) == enc);
    }
}

TEST_CASE("ed25519 reference vector") {
    // First test vector of RFC 8032, section 7.1.
    PrivateKey key(SignatureScheme::ed25519,
                   from_hex_bytes("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"));
    CHECK(hex_of(key.public_key().bytes) == "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
    auto sig = sign("", key, "rfc");
    CHECK(hex_of(sig.bytes) ==
          "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b");
    CHECK(verify("", sig, key.public_key()));
}

TEST_CASE("sign and verify properties") {
    auto kp = keygen();
    auto other = keygen();
    CHECK(kp.public_key != other.public_key);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 40; ++i) {
        auto m = random_bytes(rng, 1 + rng() % 64);
        auto sig = sign(ByteView(m), kp.private_key, "alice");
        CHECK(verify(ByteView(m), sig, kp.public_key));
        CHECK_FALSE(verify(ByteView(m), sig, other.public_key));
        for (std::size_t j = 0; j < m.size(); ++j) {
            auto mutated = m;
            mutated[j] ^= static_cast<std::uint8_t>(1 + rng() % 255);
            CHECK_FALSE(verify(ByteView(mutated), sig, kp.public_key));
        }
        auto appended = m;
        appended.push_back('\n');
        CHECK_FALSE(verify(ByteView(appended), sig, kp.public_key));

        auto truncated = sig;
        truncated.bytes.pop_back();
        CHECK_FALSE(verify(ByteView(m), truncated, kp.public_key));

        auto flipped = sig;
        flipped.bytes[rng() % flipped.bytes.size()] ^= 0x40;
        CHECK_FALSE(verify(ByteView(m), flipped, kp.public_key));
    }
}

TEST_CASE("verify never throws on malformed input") {
    auto kp = keygen();
    Signature empty{SignatureScheme::ed25519, {}, "x"};
    CHECK_FALSE(verify("m", empty, kp.public_key));
    PublicKey bad{SignatureScheme::ed25519, Bytes(5, 1)};
    CHECK_FALSE(verify("m", sign("m", kp.private_key, "x"), bad));
}

TEST_CASE("text encodings round-trip") {
    auto kp = keygen();
    auto text = kp.public_key.to_text();
    CHECK(text.rfind("ed25519:", 0) == 0);
    CHECK(PublicKey::from_text(text) == kp.public_key);
    CHECK(PublicKey::from_pem(kp.public_key.to_pem()) == kp.public_key);
    CHECK(PrivateKey::from_pem(kp.private_key.to_pem()).seed() == kp.private_key.seed());

    auto sig = sign("content", kp.private_key, "alice");
    auto back = Signature::from_text(sig.to_text(), "alice");
    CHECK(back == sig);

    CHECK_THROWS_AS(PublicKey::from_text("rsa:AAAA"), Error);
    CHECK_THROWS_AS(PublicKey::from_text("ed25519:AAAA"), Error);
    CHECK_THROWS_AS(PublicKey::from_text("no-tag"), Error);
    CHECK(scheme_from_tag("ed25519") == SignatureScheme::ed25519);
    CHECK_FALSE(scheme_from_tag("aes256"));
}

TEST_CASE("key files") {
    TempDir dir;
    auto kp = keygen();
    auto priv = dir / "k.key";
    auto pub = dir / "k.pub";
    write_private_key_file(priv, kp.private_key);
    write_public_key_file(pub, kp.public_key);

    struct stat st {};
    REQUIRE(::stat(priv.c_str(), &st) == 0);
    CHECK((st.st_mode & 0777) == 0600);
    CHECK(read_private_key_file(priv).public_key() == kp.public_key);
    CHECK(read_public_key_file(pub) == kp.public_key);
    CHECK(spock::test::slurp(pub).find("BEGIN PUBLIC KEY") != std::string::npos);

    // Existing files are never overwritten.
    CHECK_THROWS_AS(write_private_key_file(priv, kp.private_key), Error);

    ::chmod(priv.c_str(), 0644);
    CHECK_THROWS_AS(read_private_key_file(priv), Error);

    spock::test::spit(dir / "text.pub", kp.public_key.to_text() + "\n");
    CHECK(read_public_key_file(dir / "text.pub") == kp.public_key);
    CHECK_THROWS_AS(read_private_key_file(dir / "missing.key"), Error);
}

}
