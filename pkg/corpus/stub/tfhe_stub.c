/* Plaintext implementation of the stub TFHE gate-bootstrapping API.
 * Every gate equals its boolean function on the carried plaintext bits. */
#include <tfhe/tfhe.h>

#include <stdlib.h>

TFheGateBootstrappingParameterSet* new_default_gate_bootstrapping_parameters(int minimum_lambda) {
    TFheGateBootstrappingParameterSet* params = malloc(sizeof *params);
    params->minimum_lambda = minimum_lambda;
    return params;
}

void delete_gate_bootstrapping_parameters(TFheGateBootstrappingParameterSet* params) {
    free(params);
}

TFheGateBootstrappingSecretKeySet* new_random_gate_bootstrapping_secret_keyset(const TFheGateBootstrappingParameterSet* params) {
    TFheGateBootstrappingSecretKeySet* keyset = malloc(sizeof *keyset);
    keyset->params = params;
    keyset->cloud.params = params;
    return keyset;
}

void delete_gate_bootstrapping_secret_keyset(TFheGateBootstrappingSecretKeySet* keyset) {
    free(keyset);
}

LweSample* new_gate_bootstrapping_ciphertext(const TFheGateBootstrappingParameterSet* params) {
    (void)params;
    return calloc(1, sizeof(LweSample));
}

LweSample* new_gate_bootstrapping_ciphertext_array(int nbelems, const TFheGateBootstrappingParameterSet* params) {
    (void)params;
    return calloc((size_t)nbelems, sizeof(LweSample));
}

void delete_gate_bootstrapping_ciphertext(LweSample* sample) {
    free(sample);
}

void delete_gate_bootstrapping_ciphertext_array(int nbelems, LweSample* samples) {
    (void)nbelems;
    free(samples);
}

void bootsSymEncrypt(LweSample* result, int message, const TFheGateBootstrappingSecretKeySet* key) {
    (void)key;
    result->bit = (message != 0);
}

int bootsSymDecrypt(const LweSample* sample, const TFheGateBootstrappingSecretKeySet* key) {
    (void)key;
    return sample->bit;
}

void bootsCONSTANT(LweSample* result, int value, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = (value != 0);
}

void bootsNOT(LweSample* result, const LweSample* a, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = !a->bit;
}

void bootsCOPY(LweSample* result, const LweSample* a, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = a->bit;
}

void bootsAND(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = a->bit && b->bit;
}

void bootsOR(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = a->bit || b->bit;
}

void bootsXOR(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = a->bit ^ b->bit;
}

void bootsNAND(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = !(a->bit && b->bit);
}

void bootsNOR(LweSample* result, const LweSample* a, const LweSample* b, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = !(a->bit || b->bit);
}

void bootsMUX(LweSample* result, const LweSample* a, const LweSample* b, const LweSample* c, const TFheGateBootstrappingCloudKeySet* bk) {
    (void)bk;
    result->bit = a->bit ? b->bit : c->bit;
}
