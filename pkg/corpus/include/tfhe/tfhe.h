/*
 * Plaintext stand-in for the TFHE gate-bootstrapping API.
 *
 * Signatures match the real library so generated code compiles unchanged;
 * ciphertexts simply carry their plaintext bit, which makes functional test
 * drivers deterministic and dependency-free. Swap in the real library by
 * pointing the toolchain's include/lib dirs at it (library_mode = "real").
 */
#ifndef TFHE_STUB_TFHE_H
#define TFHE_STUB_TFHE_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct TFheGateBootstrappingParameterSet { int minimum_lambda; } TFheGateBootstrappingParameterSet;
typedef struct TFheGateBootstrappingCloudKeySet { const TFheGateBootstrappingParameterSet* params; } TFheGateBootstrappingCloudKeySet;
typedef struct TFheGateBootstrappingSecretKeySet { TFheGateBootstrappingCloudKeySet cloud; const TFheGateBootstrappingParameterSet* params; } TFheGateBootstrappingSecretKeySet;
typedef struct LweSample { int bit; } LweSample;

/* parameter and key management */
TFheGateBootstrappingParameterSet* new_default_gate_bootstrapping_parameters(int minimum_lambda);
void delete_gate_bootstrapping_parameters(TFheGateBootstrappingParameterSet* params);
TFheGateBootstrappingSecretKeySet* new_random_gate_bootstrapping_secret_keyset(const TFheGateBootstrappingParameterSet* params);
void delete_gate_bootstrapping_secret_keyset(TFheGateBootstrappingSecretKeySet* keyset);

/* ciphertext allocation */
LweSample* new_gate_bootstrapping_ciphertext(const TFheGateBootstrappingParameterSet* params);
LweSample* new_gate_bootstrapping_ciphertext_array(int nbelems, const TFheGateBootstrappingParameterSet* params);
void delete_gate_bootstrapping_ciphertext(LweSample* sample);
void delete_gate_bootstrapping_ciphertext_array(int nbelems, LweSample* samples);

/* single-bit encryption */
void bootsSymEncrypt(LweSample* result, int message, const TFheGateBootstrappingSecretKeySet* key);
int bootsSymDecrypt(const LweSample* sample, const TFheGateBootstrappingSecretKeySet* key);

/* bootstrapped gates */
void bootsCONSTANT(LweSample* result, int value, const TFheGateBootstrappingCloudKeySet* bk);
void bootsNOT(LweSample* result, const LweSample* a, const TFheGateBootstrappingCloudKeySet* bk);
void bootsCOPY(LweSample* result, const LweSample* a, const TFheGateBootstrappingCloudKeySet* bk);
void bootsAND(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk);
void bootsOR(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk);
void bootsXOR(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk);
void bootsNAND(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk);
void bootsNOR(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk);
void bootsMUX(LweSample* result, const LweSample* a, const LweSample* b, const LweSample* c, const TFheGateBootstrappingCloudKeySet* bk);

#ifdef __cplusplus
}
#endif

#endif /* TFHE_STUB_TFHE_H */
