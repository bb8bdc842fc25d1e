/* Functional test driver: encrypted NOT over both input bits. */
#include <tfhe/tfhe.h>
#include "../../common/driver_protocol.h"

void encrypted_not(LweSample* result, const LweSample* a,
                   const TFheGateBootstrappingCloudKeySet* bk);

int main(void) {
    TFheGateBootstrappingParameterSet* params = new_default_gate_bootstrapping_parameters(110);
    TFheGateBootstrappingSecretKeySet* key = new_random_gate_bootstrapping_secret_keyset(params);
    const TFheGateBootstrappingCloudKeySet* bk = &key->cloud;

    for (int i = 0; i < 2; i++) {
        LweSample* a = new_gate_bootstrapping_ciphertext(params);
        LweSample* r = new_gate_bootstrapping_ciphertext(params);
        bootsSymEncrypt(a, i, key);
        encrypted_not(r, a, bk);
        dp_case(i, bootsSymDecrypt(r, key) == !i);
        delete_gate_bootstrapping_ciphertext(a);
        delete_gate_bootstrapping_ciphertext(r);
    }
    delete_gate_bootstrapping_secret_keyset(key);
    delete_gate_bootstrapping_parameters(params);
    return dp_finish();
}
