/* Functional test driver: encrypted ReLU over sampled 8-bit inputs. */
#include <stdint.h>
#include <tfhe/tfhe.h>
#include "../../common/driver_protocol.h"

#define WIDTH 8

void encrypted_relu(LweSample* result, const LweSample* input,
                    const TFheGateBootstrappingCloudKeySet* bk);

static const int inputs[] = {-128, -100, -57, -5, -1, 0, 1, 7, 42, 127};

int main(void) {
    TFheGateBootstrappingParameterSet* params = new_default_gate_bootstrapping_parameters(110);
    TFheGateBootstrappingSecretKeySet* key = new_random_gate_bootstrapping_secret_keyset(params);
    const TFheGateBootstrappingCloudKeySet* bk = &key->cloud;
    int n_inputs = (int)(sizeof inputs / sizeof inputs[0]);

    for (int i = 0; i < n_inputs; i++) {
        unsigned char raw = (unsigned char)inputs[i];
        LweSample* in = new_gate_bootstrapping_ciphertext_array(WIDTH, params);
        LweSample* out = new_gate_bootstrapping_ciphertext_array(WIDTH, params);
        for (int bit = 0; bit < WIDTH; bit++) {
            bootsSymEncrypt(&in[bit], (raw >> bit) & 1, key);
        }
        encrypted_relu(out, in, bk);
        unsigned decoded = 0;
        for (int bit = 0; bit < WIDTH; bit++) {
            decoded |= (unsigned)bootsSymDecrypt(&out[bit], key) << bit;
        }
        int got = (int8_t)decoded;
        int want = inputs[i] > 0 ? inputs[i] : 0;
        dp_case(i, got == want);
        delete_gate_bootstrapping_ciphertext_array(WIDTH, in);
        delete_gate_bootstrapping_ciphertext_array(WIDTH, out);
    }
    delete_gate_bootstrapping_secret_keyset(key);
    delete_gate_bootstrapping_parameters(params);
    return dp_finish();
}
