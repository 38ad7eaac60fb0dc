#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spock {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// SHA-256 digest rendered as 64 lowercase hex characters.
class Digest {
public:
    /// Throws Error(parse) unless `hex` is exactly 64 chars of [0-9a-f].
    static Digest from_hex(std::string_view hex);
    static std::optional<Digest> try_from_hex(std::string_view hex);
    static bool is_valid_hex(std::string_view hex);

    const std::string& hex() const { return hex_; }
    std::string_view prefix(std::size_t n = 12) const {
        return std::string_view(hex_).substr(0, n);
    }

    auto operator<=>(const Digest&) const = default;

private:
    explicit Digest(std::string hex) : hex_(std::move(hex)) {}
    std::string hex_;
};

Digest digest(ByteView content);
inline Digest digest(std::string_view content) { return digest(as_bytes(content)); }

// Text encoding (base64, standard alphabet, padded). Decoding is strict:
// whitespace, bad padding and non-canonical trailing bits are rejected.
std::string encode_text(ByteView bytes);
inline std::string encode_text(std::string_view s) { return encode_text(as_bytes(s)); }
Bytes decode_text(std::string_view text);
std::optional<Bytes> try_decode_text(std::string_view text);

enum class SignatureScheme { ed25519 };

std::string_view scheme_tag(SignatureScheme scheme);
std::optional<SignatureScheme> scheme_from_tag(std::string_view tag);

struct PublicKey {
    SignatureScheme scheme = SignatureScheme::ed25519;
    Bytes bytes;

    /// "<scheme>:<base64>", the form stored in the ledger.
    std::string to_text() const;
    static PublicKey from_text(std::string_view text);

    std::string to_pem() const;
    static PublicKey from_pem(std::string_view pem);

    bool operator==(const PublicKey&) const = default;
};

/// Secret half of a key pair. Wiped on destruction; never written to the ledger.
class PrivateKey {
public:
    PrivateKey(SignatureScheme scheme, Bytes seed);
    PrivateKey(const PrivateKey&) = default;
    PrivateKey& operator=(const PrivateKey&) = default;
    PrivateKey(PrivateKey&&) noexcept = default;
    PrivateKey& operator=(PrivateKey&&) noexcept = default;
    ~PrivateKey();

    SignatureScheme scheme() const { return scheme_; }
    const Bytes& seed() const { return seed_; }
    PublicKey public_key() const;

    std::string to_pem() const;
    static PrivateKey from_pem(std::string_view pem);

private:
    SignatureScheme scheme_;
    Bytes seed_;
};

struct KeyPair {
    PublicKey public_key;
    PrivateKey private_key;
};

struct Signature {
    SignatureScheme scheme = SignatureScheme::ed25519;
    Bytes bytes;
    std::string signer_id;

    /// "<scheme>:<base64>"; the signer travels separately in records.
    std::string to_text() const;
    static Signature from_text(std::string_view text, std::string signer_id);

    bool operator==(const Signature&) const = default;
};

KeyPair keygen(SignatureScheme scheme = SignatureScheme::ed25519);

Signature sign(ByteView content, const PrivateKey& key, std::string signer_id);
inline Signature sign(std::string_view content, const PrivateKey& key, std::string signer_id) {
    return sign(as_bytes(content), key, std::move(signer_id));
}

/// Never throws: malformed keys or signatures simply fail to verify.
bool verify(ByteView content, const Signature& sig, const PublicKey& key);
inline bool verify(std::string_view content, const Signature& sig, const PublicKey& key) {
    return verify(as_bytes(content), sig, key);
}

// Key files. The private key file is created with mode 0600 and refused on
// read if group or other can access it.
void write_private_key_file(const std::filesystem::path& path, const PrivateKey& key);
PrivateKey read_private_key_file(const std::filesystem::path& path);
void write_public_key_file(const std::filesystem::path& path, const PublicKey& key);
PublicKey read_public_key_file(const std::filesystem::path& path);

} // namespace spock
