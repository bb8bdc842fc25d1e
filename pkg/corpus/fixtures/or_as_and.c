/* Sabotage fixture: claims to be encrypted_and but computes OR, so the
 * AND driver's (0,1) and (1,0) cases fail: expected outcome 2/4. */
#include <tfhe/tfhe.h>

void encrypted_and(LweSample* result, const LweSample* a, const LweSample* b,
                   const TFheGateBootstrappingCloudKeySet* bk) {
    bootsOR(result, a, b, bk);
}
