/* Functional test driver: encrypted OR against the full truth table. */
#include <tfhe/tfhe.h>
#include "../../common/driver_protocol.h"

void encrypted_or(LweSample* result, const LweSample* a, const LweSample* b,
                   const TFheGateBootstrappingCloudKeySet* bk);

int main(void) {
    TFheGateBootstrappingParameterSet* params = new_default_gate_bootstrapping_parameters(110);
    TFheGateBootstrappingSecretKeySet* key = new_random_gate_bootstrapping_secret_keyset(params);
    const TFheGateBootstrappingCloudKeySet* bk = &key->cloud;

    for (int i = 0; i < 4; i++) {
        int bit_a = (i >> 1) & 1;
        int bit_b = i & 1;
        LweSample* a = new_gate_bootstrapping_ciphertext(params);
        LweSample* b = new_gate_bootstrapping_ciphertext(params);
        LweSample* r = new_gate_bootstrapping_ciphertext(params);
        bootsSymEncrypt(a, bit_a, key);
        bootsSymEncrypt(b, bit_b, key);
        encrypted_or(r, a, b, bk);
        dp_case(i, bootsSymDecrypt(r, key) == (bit_a || bit_b));
        delete_gate_bootstrapping_ciphertext(a);
        delete_gate_bootstrapping_ciphertext(b);
        delete_gate_bootstrapping_ciphertext(r);
    }
    delete_gate_bootstrapping_secret_keyset(key);
    delete_gate_bootstrapping_parameters(params);
    return dp_finish();
}
